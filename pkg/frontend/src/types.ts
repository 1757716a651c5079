/** Wire shapes of the /v1 service, mirrored field for field. */

export interface Box {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface WireTag {
  label: string;
  score: number;
}

// mask_id is null for entities the segmenter produced no mask for
export interface WireEntity {
  label: string;
  box: Box;
  detector_score: number;
  mask_id: string | null;
}

export interface WireMatch {
  entity_index: number;
  span: [number, number];
  surface: string;
}

export interface WireGrounding {
  schema_version: number;
  tags: WireTag[];
  entities: WireEntity[];
  matches: WireMatch[];
  clip_warnings: string[];
  error: string | null;
}

export type Verdict = "related" | "unrelated" | "uncertain";

export interface AssistantPayload {
  role: "assistant";
  text: string;
  grounding: WireGrounding | null;
  grounding_error: string | null;
  related_verdict: Verdict | null;
}

export interface MessageResponse {
  schema_version: number;
  session_id: string;
  turn_index: number;
  reply: AssistantPayload;
}

export interface SessionSnapshot {
  schema_version: number;
  id: string;
  created: string;
  updated: string;
  turns: unknown[];
  attachments: unknown[];
}

export interface Health {
  schema_version: number;
  status: string;
  backend: string;
  grounding: boolean;
}
