/** Canned /v1 payloads and a scriptable mock client for the app tests. */

import { ApiFailure, type ApiClient, type OutgoingMessage } from "../src/api.js";
import type { MessageResponse, WireGrounding } from "../src/types.js";

export const DESCRIBE_IMAGE = "What is the image?";
export const DESCRIBE_AUDIO = "Pay attention to the audio and describe what you notice.";
export const LOCALIZE_SOUND = "Please find the source that emits the given sound in this image.";
export const RELATE = "Are the audio and image related to each other? What are they?";

export const IMAGE_REPLY = "A dog catches a frisbee.";
export const AUDIO_REPLY = "A steady alarm tone rings.";
export const LOCALIZE_REPLY = "The dog emits the sound.";

function dogFrisbeeGrounding(turnIndex: number): WireGrounding {
  return {
    schema_version: 1,
    tags: [
      { label: "dog", score: 0.93 },
      { label: "frisbee", score: 0.88 },
    ],
    entities: [
      {
        label: "dog",
        box: { x_min: 12, y_min: 20, x_max: 44, y_max: 52 },
        detector_score: 0.9,
        mask_id: `t${turnIndex}e0`,
      },
      {
        label: "frisbee",
        box: { x_min: 60, y_min: 16, x_max: 84, y_max: 40 },
        detector_score: 0.85,
        mask_id: `t${turnIndex}e1`,
      },
    ],
    matches: [
      { entity_index: 0, span: [2, 5], surface: "dog" },
      { entity_index: 1, span: [16, 23], surface: "frisbee" },
    ],
    clip_warnings: [],
    error: null,
  };
}

// entity without a mask: the degraded case the box fallback exists for
function masklessGrounding(): WireGrounding {
  return {
    schema_version: 1,
    tags: [{ label: "dog", score: 0.93 }],
    entities: [
      {
        label: "dog",
        box: { x_min: 12, y_min: 20, x_max: 44, y_max: 52 },
        detector_score: 0.9,
        mask_id: null,
      },
    ],
    matches: [{ entity_index: 0, span: [4, 7], surface: "dog" }],
    clip_warnings: [],
    error: null,
  };
}

export function groundedResponse(turnIndex: number): MessageResponse {
  return {
    schema_version: 1,
    session_id: "s1",
    turn_index: turnIndex,
    reply: {
      role: "assistant",
      text: IMAGE_REPLY,
      grounding: dogFrisbeeGrounding(turnIndex),
      grounding_error: null,
      related_verdict: null,
    },
  };
}

export function audioResponse(turnIndex: number): MessageResponse {
  return {
    schema_version: 1,
    session_id: "s1",
    turn_index: turnIndex,
    reply: {
      role: "assistant",
      text: AUDIO_REPLY,
      grounding: null,
      grounding_error: null,
      related_verdict: null,
    },
  };
}

export function localizationResponse(turnIndex: number): MessageResponse {
  return {
    schema_version: 1,
    session_id: "s1",
    turn_index: turnIndex,
    reply: {
      role: "assistant",
      text: LOCALIZE_REPLY,
      grounding: masklessGrounding(),
      grounding_error: null,
      related_verdict: null,
    },
  };
}

export function verdictResponse(turnIndex: number, verdict: "related" | "unrelated" | "uncertain"): MessageResponse {
  return {
    schema_version: 1,
    session_id: "s1",
    turn_index: turnIndex,
    reply: {
      role: "assistant",
      text: "The image shows a dog catching a frisbee on grass. The audio is a steady alarm tone.",
      grounding: null,
      grounding_error: null,
      related_verdict: verdict,
    },
  };
}

export interface SentRecord {
  sessionId: string;
  message: OutgoingMessage;
}

export type ScriptStep = MessageResponse | ApiFailure | (() => Promise<MessageResponse>);

export interface MockApi {
  api: ApiClient;
  sent: SentRecord[];
  maskRequests: string[];
}

/** Client that replays a fixed script of responses; throws when it runs dry. */
export function mockApi(script: ScriptStep[]): MockApi {
  const queue = [...script];
  const sent: SentRecord[] = [];
  const maskRequests: string[] = [];

  const api: ApiClient = {
    async health() {
      return { schema_version: 1, status: "ok", backend: "canned", grounding: true };
    },
    async openSession() {
      return {
        schema_version: 1,
        id: "s1",
        created: "2026-01-01T00:00:00+00:00",
        updated: "2026-01-01T00:00:00+00:00",
        turns: [],
        attachments: [],
      };
    },
    async sendMessage(sessionId, message) {
      sent.push({ sessionId, message });
      const step = queue.shift();
      if (step === undefined) throw new Error("mock script exhausted");
      if (step instanceof ApiFailure) throw step;
      if (typeof step === "function") return step();
      return step;
    },
    async fetchMask(_sessionId, maskId) {
      maskRequests.push(maskId);
      return new Blob(["not-a-real-png"], { type: "image/png" });
    },
  };
  return { api, sent, maskRequests };
}

export function pngFile(name = "photo.png"): File {
  return new File([new Uint8Array([137, 80, 78, 71])], name, { type: "image/png" });
}

export function wavFile(name = "clip.wav"): File {
  return new File([new Uint8Array([82, 73, 70, 70])], name, { type: "audio/wav" });
}
