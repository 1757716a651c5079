/**
 * Single-reducer session state.
 *
 * Every update flows through reduce(); the view layer only reads. The reducer
 * is pure — object URLs and fetches are the caller's business. Invariants
 * held here:
 *  - at most one in-flight message (send_started while busy is a no-op),
 *  - a failed send leaves the transcript exactly as it was,
 *  - an exchange's overlays are built from its own reply payload only.
 */

import type { OutgoingMessage } from "./api.js";
import type { AssistantPayload, MessageResponse } from "./types.js";

export interface StagedFile {
  blob: Blob;
  name: string;
  url: string;
  // decoded pixel size; null when the probe could not read it (audio, test DOM)
  width: number | null;
  height: number | null;
}

export interface Draft {
  text: string;
  image: StagedFile | null;
  audio: StagedFile | null;
}

/** One human+assistant pair as returned by the service. */
export interface Exchange {
  turnIndex: number;
  humanText: string;
  sentImage: StagedFile | null;
  sentAudio: StagedFile | null;
  // the image the grounding ran against; may be carried from an earlier turn
  imageUrl: string | null;
  imageWidth: number | null;
  imageHeight: number | null;
  reply: AssistantPayload;
}

export type MaskEntry =
  | { status: "loading" }
  | { status: "ready"; url: string }
  | { status: "failed" };

export interface HoverTarget {
  turnIndex: number;
  entityIndex: number;
}

export interface ScopeImage {
  url: string;
  width: number | null;
  height: number | null;
}

export interface UiState {
  sessionId: string | null;
  exchanges: Exchange[];
  staged: { image: StagedFile | null; audio: StagedFile | null };
  scopeImage: ScopeImage | null;
  inFlight: Draft | null;
  error: { message: string; draft: Draft } | null;
  hover: HoverTarget | null;
  masks: Record<string, MaskEntry>;
}

export const initialState: UiState = {
  sessionId: null,
  exchanges: [],
  staged: { image: null, audio: null },
  scopeImage: null,
  inFlight: null,
  error: null,
  hover: null,
  masks: {},
};

export type Action =
  | { type: "session_opened"; id: string }
  | { type: "file_staged"; kind: "image" | "audio"; file: StagedFile }
  | { type: "file_removed"; kind: "image" | "audio" }
  | { type: "send_started"; draft: Draft }
  | { type: "turn_received"; response: MessageResponse; draft: Draft }
  | { type: "send_failed"; message: string; draft: Draft }
  | { type: "error_dismissed" }
  | { type: "hover_set"; target: HoverTarget | null }
  | { type: "mask_loading"; maskId: string }
  | { type: "mask_ready"; maskId: string; url: string }
  | { type: "mask_failed"; maskId: string };

export function toOutgoing(draft: Draft): OutgoingMessage {
  return {
    text: draft.text,
    image: draft.image ? { blob: draft.image.blob, name: draft.image.name } : null,
    audio: draft.audio ? { blob: draft.audio.blob, name: draft.audio.name } : null,
  };
}

function buildExchange(state: UiState, response: MessageResponse, draft: Draft): Exchange {
  const scope = draft.image
    ? { url: draft.image.url, width: draft.image.width, height: draft.image.height }
    : state.scopeImage;
  return {
    turnIndex: response.turn_index,
    humanText: draft.text,
    sentImage: draft.image,
    sentAudio: draft.audio,
    imageUrl: scope ? scope.url : null,
    imageWidth: scope ? scope.width : null,
    imageHeight: scope ? scope.height : null,
    reply: response.reply,
  };
}

export function reduce(state: UiState, action: Action): UiState {
  switch (action.type) {
    case "session_opened":
      return { ...state, sessionId: action.id };

    case "file_staged":
      return { ...state, staged: { ...state.staged, [action.kind]: action.file } };

    case "file_removed":
      return { ...state, staged: { ...state.staged, [action.kind]: null } };

    case "send_started":
      if (state.inFlight) return state; // one request at a time; the second submit is dropped
      return { ...state, inFlight: action.draft, error: null };

    case "turn_received": {
      const exchange = buildExchange(state, action.response, action.draft);
      return {
        ...state,
        exchanges: [...state.exchanges, exchange],
        staged: { image: null, audio: null },
        scopeImage: action.draft.image
          ? {
              url: action.draft.image.url,
              width: action.draft.image.width,
              height: action.draft.image.height,
            }
          : state.scopeImage,
        inFlight: null,
        error: null,
      };
    }

    case "send_failed":
      // transcript and staged files stay untouched so a retry sends the same thing
      return { ...state, inFlight: null, error: { message: action.message, draft: action.draft } };

    case "error_dismissed":
      return { ...state, error: null };

    case "hover_set":
      return { ...state, hover: action.target };

    case "mask_loading":
      return { ...state, masks: { ...state.masks, [action.maskId]: { status: "loading" } } };

    case "mask_ready":
      return {
        ...state,
        masks: { ...state.masks, [action.maskId]: { status: "ready", url: action.url } },
      };

    case "mask_failed":
      return { ...state, masks: { ...state.masks, [action.maskId]: { status: "failed" } } };
  }
}
