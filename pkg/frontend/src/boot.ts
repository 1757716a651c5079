import { httpClient } from "./api.js";
import { mountApp } from "./main.js";

mountApp(document.getElementById("app") as HTMLElement, { api: httpClient() });
