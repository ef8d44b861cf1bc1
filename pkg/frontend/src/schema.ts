/** Annotation vocabulary and wire types shared with the study server.
 *
 * The string constants here must stay in lockstep with the server-side
 * schema; the server is authoritative and rejects anything else with a 422.
 */

export const COARSE = [
  "linguistic_style",
  "personality",
  "fact",
  "memory",
  "inside_scene",
  "exclusion",
] as const;

export type Coarse = (typeof COARSE)[number];

/** Coarse categories that require a subtype, with their allowed subtypes. */
export const FINE: Readonly<Partial<Record<Coarse, readonly string[]>>> = {
  fact: ["attribute", "relation", "status"],
  inside_scene: ["background", "mention"],
};

export const DEPENDENCY = ["none", "direct", "indirect"] as const;

export type Dependency = (typeof DEPENDENCY)[number];

export const REASONING = [
  "default_conjunction",
  "multihop_character",
  "multihop_textual",
  "commonsense",
] as const;

export type Reasoning = (typeof REASONING)[number];

export interface SceneRef {
  show: string;
  episode_id: string;
  scene_index: number;
}

/** One transcript line as served: dialogue carries a speaker, the rest don't. */
export interface Line {
  kind: string;
  text: string;
  speaker_id?: string;
  speaker?: string;
}

export interface Item {
  scene_ref: SceneRef;
  speaker_id: string;
  candidates: string[];
  lines: Line[];
}

export interface SessionInfo {
  session_id: string;
  total: number;
}

export interface NextResponse {
  session_id: string;
  cursor: number;
  total: number;
  item: Item;
}

export interface EvidenceTag {
  coarse: Coarse;
  fine?: string;
}

export interface AnswerPayload {
  scene_ref: SceneRef;
  speaker_id: string;
  annotator_id: string;
  guess: string;
  evidence: EvidenceTag[];
  dependency: Dependency;
  reasoning: Reasoning[];
}

export interface AnswerResponse {
  correct: boolean | null;
  warnings: string[];
}

export interface AgreementRow {
  a: string;
  b: string;
  n_items: number;
  groups: Record<string, number | null>;
}

export interface Summary {
  n_records: number;
  annotators: string[];
  accuracy: {
    overall: number | null;
    per_show: Record<string, number>;
    per_annotator: Record<string, number>;
  };
  agreement: AgreementRow[];
  reveal_mode: "on" | "off";
}
