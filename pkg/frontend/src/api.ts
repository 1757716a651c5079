/** Thin fetch client for the /v1 service. All JSON, except masks (PNG blobs). */

import type { Health, MessageResponse, SessionSnapshot } from "./types.js";

export class ApiFailure extends Error {
  status: number;
  code: string;
  stage: string | null;

  constructor(status: number, code: string, message: string, stage: string | null) {
    super(message);
    this.name = "ApiFailure";
    this.status = status;
    this.code = code;
    this.stage = stage;
  }
}

export interface OutgoingFile {
  blob: Blob;
  name: string;
}

export interface OutgoingMessage {
  text: string;
  image: OutgoingFile | null;
  audio: OutgoingFile | null;
}

export interface ApiClient {
  health(): Promise<Health>;
  openSession(): Promise<SessionSnapshot>;
  sendMessage(sessionId: string, message: OutgoingMessage): Promise<MessageResponse>;
  fetchMask(sessionId: string, maskId: string): Promise<Blob>;
}

async function raiseFailure(res: Response): Promise<never> {
  let code = "http_error";
  let message = `${res.status} ${res.statusText}`;
  let stage: string | null = null;
  try {
    const body = await res.json();
    if (typeof body.code === "string") code = body.code;
    if (typeof body.message === "string") message = body.message;
    if (typeof body.stage === "string") stage = body.stage;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiFailure(res.status, code, message, stage);
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) await raiseFailure(res);
  return res.json() as Promise<T>;
}

export function httpClient(base = ""): ApiClient {
  return {
    async health() {
      return asJson<Health>(await fetch(`${base}/v1/health`));
    },

    async openSession() {
      return asJson<SessionSnapshot>(await fetch(`${base}/v1/sessions`, { method: "POST" }));
    },

    async sendMessage(sessionId, message) {
      const form = new FormData();
      form.append("text", message.text);
      // rewrap as File so the part carries its filename in every runtime
      if (message.image) {
        const { blob, name } = message.image;
        form.append("image", new File([blob], name, { type: blob.type }));
      }
      if (message.audio) {
        const { blob, name } = message.audio;
        form.append("audio", new File([blob], name, { type: blob.type }));
      }
      const res = await fetch(`${base}/v1/sessions/${sessionId}/messages`, {
        method: "POST",
        body: form,
      });
      return asJson<MessageResponse>(res);
    },

    async fetchMask(sessionId, maskId) {
      const res = await fetch(`${base}/v1/sessions/${sessionId}/masks/${maskId}`);
      if (!res.ok) await raiseFailure(res);
      return res.blob();
    },
  };
}
