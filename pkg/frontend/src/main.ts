/**
 * DOM shell for the grounded chat client.
 *
 * mountApp() renders the static frame once, then patches regions as the
 * store changes: the transcript rebuilds only when exchanges or the
 * in-flight draft change, hover and mask visibility are toggled in place so
 * the element under the cursor is never recreated mid-hover.
 */

import { ApiFailure, type ApiClient } from "./api.js";
import { boxPercent, entityColor, segmentReply } from "./overlay.js";
import {
  initialState,
  reduce,
  toOutgoing,
  type Action,
  type Draft,
  type Exchange,
  type StagedFile,
  type UiState,
} from "./store.js";

export interface ImageSize {
  width: number;
  height: number;
}

export interface MountOptions {
  api: ApiClient;
  /** Reads pixel dimensions of an image blob. Injectable for tests. */
  measureImage?: (blob: Blob) => Promise<ImageSize | null>;
}

export interface AppHandle {
  attach(kind: "image" | "audio", file: File): Promise<void>;
  getState(): UiState;
}

export const QUICK_PROMPTS = [
  "What is the image?",
  "Pay attention to the audio and describe what you notice.",
  "Please find the source that emits the given sound in this image.",
  "Are the audio and image related to each other? What are they?",
];

async function defaultMeasure(blob: Blob): Promise<ImageSize | null> {
  try {
    const bitmap = await createImageBitmap(blob);
    const size = { width: bitmap.width, height: bitmap.height };
    bitmap.close();
    return size;
  } catch {
    return null;
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiFailure) return `service error (${err.code}): ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

const SHELL = `
<header class="bar">
  <h1>groundchat</h1>
  <span class="meta" data-ref="backend"></span>
  <span class="meta" data-ref="session"></span>
</header>
<main class="transcript" data-ref="transcript"></main>
<div class="banner" data-ref="banner" hidden>
  <span data-ref="banner-text"></span>
  <button type="button" data-ref="retry">Retry</button>
  <button type="button" data-ref="dismiss">Dismiss</button>
</div>
<form class="composer" data-ref="composer">
  <div class="quick" data-ref="quick"></div>
  <div class="staged" data-ref="staged"></div>
  <div class="row">
    <label class="file-btn">Image
      <input type="file" accept="image/*" data-ref="image-input" hidden>
    </label>
    <label class="file-btn">Audio
      <input type="file" accept="audio/*" data-ref="audio-input" hidden>
    </label>
    <textarea data-ref="text" rows="2" placeholder="Ask about the image or audio..."></textarea>
    <button type="submit" data-ref="send">Send</button>
  </div>
</form>
`;

export function mountApp(root: HTMLElement, opts: MountOptions): AppHandle {
  const measure = opts.measureImage ?? defaultMeasure;
  let state: UiState = initialState;

  root.classList.add("app");
  root.innerHTML = SHELL;
  const ref = <T extends HTMLElement>(name: string) =>
    root.querySelector(`[data-ref="${name}"]`) as T;

  const transcriptEl = ref<HTMLElement>("transcript");
  const bannerEl = ref<HTMLElement>("banner");
  const bannerTextEl = ref<HTMLElement>("banner-text");
  const retryBtn = ref<HTMLButtonElement>("retry");
  const dismissBtn = ref<HTMLButtonElement>("dismiss");
  const composerEl = ref<HTMLFormElement>("composer");
  const quickEl = ref<HTMLElement>("quick");
  const stagedEl = ref<HTMLElement>("staged");
  const imageInput = ref<HTMLInputElement>("image-input");
  const audioInput = ref<HTMLInputElement>("audio-input");
  const textEl = ref<HTMLTextAreaElement>("text");
  const sendBtn = ref<HTMLButtonElement>("send");
  const sessionEl = ref<HTMLElement>("session");
  const backendEl = ref<HTMLElement>("backend");

  function dispatch(action: Action) {
    const prev = state;
    state = reduce(state, action);
    if (state === prev) return;
    if (prev.exchanges !== state.exchanges || prev.inFlight !== state.inFlight) {
      renderTranscript();
    }
    if (prev.staged !== state.staged) renderStaged();
    if (prev.error !== state.error) renderBanner();
    if (prev.sessionId !== state.sessionId) {
      sessionEl.textContent = state.sessionId ? `session ${state.sessionId.slice(0, 8)}` : "";
    }
    applyControls();
    applyHover();
  }

  // -- transcript ------------------------------------------------------------

  function renderTranscript() {
    transcriptEl.textContent = "";
    for (const exchange of state.exchanges) {
      transcriptEl.append(humanBubble(exchange), assistantBubble(exchange));
    }
    if (state.inFlight) {
      // optimistic human turn; it disappears again if the send fails
      transcriptEl.append(pendingBubble(state.inFlight));
      const wait = el("div", "turn assistant pending");
      wait.append(el("p", "reply", "..."));
      transcriptEl.append(wait);
    }
    transcriptEl.scrollTop = transcriptEl.scrollHeight;
  }

  function attachmentRow(image: StagedFile | null, audio: StagedFile | null): HTMLElement | null {
    if (!image && !audio) return null;
    const row = el("div", "attachments");
    if (image) {
      const img = el("img", "thumb");
      img.src = image.url;
      img.alt = image.name;
      row.append(img);
    }
    if (audio) {
      const player = el("audio");
      player.controls = true;
      player.src = audio.url;
      row.append(player);
    }
    return row;
  }

  function humanBubble(exchange: Exchange): HTMLElement {
    const bubble = el("div", "turn human");
    bubble.append(el("p", "text", exchange.humanText));
    const row = attachmentRow(exchange.sentImage, exchange.sentAudio);
    if (row) bubble.append(row);
    return bubble;
  }

  function pendingBubble(draft: Draft): HTMLElement {
    const bubble = el("div", "turn human pending");
    bubble.append(el("p", "text", draft.text));
    const row = attachmentRow(draft.image, draft.audio);
    if (row) bubble.append(row);
    return bubble;
  }

  function hoverable(node: HTMLElement, turnIndex: number, entityIndex: number) {
    node.dataset.turn = String(turnIndex);
    node.dataset.entity = String(entityIndex);
    node.addEventListener("mouseenter", () => hoverEntity(turnIndex, entityIndex));
    node.addEventListener("mouseleave", () => dispatch({ type: "hover_set", target: null }));
  }

  function assistantBubble(exchange: Exchange): HTMLElement {
    const bubble = el("div", "turn assistant");
    bubble.dataset.turn = String(exchange.turnIndex);
    const grounding = exchange.reply.grounding;

    const reply = el("p", "reply");
    const segments = segmentReply(exchange.reply.text, grounding ? grounding.matches : []);
    for (const segment of segments) {
      if (segment.entityIndex === null) {
        reply.append(document.createTextNode(segment.text));
      } else {
        const span = el("span", "reply-span", segment.text);
        span.style.setProperty("--hl", entityColor(segment.entityIndex));
        hoverable(span, exchange.turnIndex, segment.entityIndex);
        reply.append(span);
      }
    }
    bubble.append(reply);

    if (exchange.reply.related_verdict) {
      bubble.append(
        el("span", `verdict verdict-${exchange.reply.related_verdict}`, exchange.reply.related_verdict),
      );
    }
    if (exchange.reply.grounding_error) {
      bubble.append(el("p", "grounding-note", `grounding unavailable: ${exchange.reply.grounding_error}`));
    }

    if (grounding && grounding.entities.length > 0) {
      const chips = el("div", "chips");
      grounding.entities.forEach((entity, i) => {
        const chip = el("button", "chip", entity.label);
        chip.type = "button";
        chip.style.setProperty("--chip", entityColor(i));
        hoverable(chip, exchange.turnIndex, i);
        chips.append(chip);
      });
      bubble.append(chips);

      if (exchange.imageUrl) {
        bubble.append(viewer(exchange, grounding.entities.length));
      }
    }
    return bubble;
  }

  function viewer(exchange: Exchange, entityCount: number): HTMLElement {
    const grounding = exchange.reply.grounding!;
    const box = el("div", "viewer");
    const img = el("img", "viewer-image");
    img.src = exchange.imageUrl!;
    img.alt = "grounded image";
    box.append(img);

    for (let i = 0; i < entityCount; i++) {
      const entity = grounding.entities[i]!;
      if (entity.mask_id) {
        const overlay = el("div", "mask-overlay");
        overlay.dataset.turn = String(exchange.turnIndex);
        overlay.dataset.entity = String(i);
        overlay.dataset.maskId = entity.mask_id;
        overlay.style.background = entityColor(i);
        overlay.hidden = true;
        box.append(overlay);
      }
      // percent-positioned outline, shown when no usable mask exists
      if (exchange.imageWidth && exchange.imageHeight) {
        const outline = el("div", "box-fallback");
        outline.dataset.turn = String(exchange.turnIndex);
        outline.dataset.entity = String(i);
        if (entity.mask_id) outline.dataset.maskId = entity.mask_id;
        const rect = boxPercent(entity.box, exchange.imageWidth, exchange.imageHeight);
        outline.style.left = rect.left;
        outline.style.top = rect.top;
        outline.style.width = rect.width;
        outline.style.height = rect.height;
        outline.style.borderColor = entityColor(i);
        outline.hidden = true;
        box.append(outline);
      }
    }
    return box;
  }

  // -- hover and masks ---------------------------------------------------------

  function hoverEntity(turnIndex: number, entityIndex: number) {
    dispatch({ type: "hover_set", target: { turnIndex, entityIndex } });
    const exchange = state.exchanges.find((e) => e.turnIndex === turnIndex);
    const maskId = exchange?.reply.grounding?.entities[entityIndex]?.mask_id;
    if (!maskId || state.masks[maskId] || !state.sessionId) return;
    dispatch({ type: "mask_loading", maskId });
    opts.api.fetchMask(state.sessionId, maskId).then(
      (blob) => dispatch({ type: "mask_ready", maskId, url: URL.createObjectURL(blob) }),
      () => dispatch({ type: "mask_failed", maskId }),
    );
  }

  function applyHover() {
    const target = state.hover;
    const hits = (node: HTMLElement) =>
      target !== null &&
      Number(node.dataset.turn) === target.turnIndex &&
      Number(node.dataset.entity) === target.entityIndex;

    transcriptEl.querySelectorAll<HTMLElement>(".chip").forEach((chip) => {
      chip.classList.toggle("active", hits(chip));
    });
    transcriptEl.querySelectorAll<HTMLElement>(".reply-span").forEach((span) => {
      span.classList.toggle("hl", hits(span));
    });
    transcriptEl.querySelectorAll<HTMLElement>(".mask-overlay").forEach((overlay) => {
      const entry = state.masks[overlay.dataset.maskId ?? ""];
      const show = hits(overlay) && entry !== undefined && entry.status === "ready";
      overlay.hidden = !show;
      if (show && entry.status === "ready") {
        overlay.style.setProperty("--mask-url", `url("${entry.url}")`);
      }
    });
    transcriptEl.querySelectorAll<HTMLElement>(".box-fallback").forEach((outline) => {
      const maskId = outline.dataset.maskId;
      const failed = maskId !== undefined && state.masks[maskId]?.status === "failed";
      outline.hidden = !(hits(outline) && (maskId === undefined || failed));
    });
  }

  // -- composer ----------------------------------------------------------------

  async function attach(kind: "image" | "audio", file: File): Promise<void> {
    const prev = state.staged[kind];
    const url = URL.createObjectURL(file);
    let width: number | null = null;
    let height: number | null = null;
    if (kind === "image") {
      const size = await measure(file);
      if (size) ({ width, height } = size);
    }
    dispatch({ type: "file_staged", kind, file: { blob: file, name: file.name, url, width, height } });
    if (prev) URL.revokeObjectURL(prev.url); // replaced before ever being sent
  }

  function removeStaged(kind: "image" | "audio") {
    const prev = state.staged[kind];
    dispatch({ type: "file_removed", kind });
    if (prev) URL.revokeObjectURL(prev.url);
  }

  function renderStaged() {
    stagedEl.textContent = "";
    const { image, audio } = state.staged;
    if (image) {
      const chip = el("span", "staged-file");
      const thumb = el("img", "thumb-small");
      thumb.src = image.url;
      thumb.alt = image.name;
      chip.append(thumb, el("span", "name", image.name), removeButton("image"));
      stagedEl.append(chip);
    }
    if (audio) {
      const chip = el("span", "staged-file");
      chip.append(el("span", "name", audio.name), removeButton("audio"));
      stagedEl.append(chip);
    }
  }

  function removeButton(kind: "image" | "audio"): HTMLButtonElement {
    const btn = el("button", "remove", "x");
    btn.type = "button";
    btn.setAttribute("aria-label", `remove ${kind}`);
    btn.addEventListener("click", () => removeStaged(kind));
    return btn;
  }

  async function submit(draft: Draft) {
    if (!state.sessionId || state.inFlight) return;
    dispatch({ type: "send_started", draft });
    if (state.inFlight !== draft) return; // another submit won the race
    try {
      const response = await opts.api.sendMessage(state.sessionId, toOutgoing(draft));
      dispatch({ type: "turn_received", response, draft });
      textEl.value = "";
    } catch (err) {
      dispatch({ type: "send_failed", message: describeError(err), draft });
    }
  }

  function renderBanner() {
    bannerEl.hidden = state.error === null;
    bannerTextEl.textContent = state.error ? state.error.message : "";
  }

  function applyControls() {
    sendBtn.disabled = state.sessionId === null || state.inFlight !== null;
  }

  composerEl.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = textEl.value;
    if (!text.trim()) return;
    void submit({ text, image: state.staged.image, audio: state.staged.audio });
  });

  retryBtn.addEventListener("click", () => {
    if (state.error) void submit(state.error.draft);
  });
  dismissBtn.addEventListener("click", () => dispatch({ type: "error_dismissed" }));

  imageInput.addEventListener("change", () => {
    const file = imageInput.files?.[0];
    if (file) void attach("image", file);
    imageInput.value = "";
  });
  audioInput.addEventListener("change", () => {
    const file = audioInput.files?.[0];
    if (file) void attach("audio", file);
    audioInput.value = "";
  });

  for (const prompt of QUICK_PROMPTS) {
    const btn = el("button", "quick-prompt", prompt);
    btn.type = "button";
    btn.addEventListener("click", () => {
      textEl.value = prompt;
      textEl.focus();
    });
    quickEl.append(btn);
  }

  applyControls();

  opts.api.openSession().then(
    (snapshot) => dispatch({ type: "session_opened", id: snapshot.id }),
    (err) => dispatch({ type: "send_failed", message: describeError(err), draft: emptyDraft() }),
  );
  opts.api.health().then(
    (health) => {
      backendEl.textContent = `backend ${health.backend}`;
    },
    () => {
      backendEl.textContent = "";
    },
  );

  return { attach, getState: () => state };
}

function emptyDraft(): Draft {
  return { text: "", image: null, audio: null };
}
