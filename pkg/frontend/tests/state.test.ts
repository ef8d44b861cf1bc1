import { describe, expect, it } from "vitest";
import {
  accuracy,
  canSubmit,
  draftProblems,
  emptyDraft,
  emptyProgress,
  recordResult,
  setDependency,
  setFine,
  setGuess,
  toggleEvidence,
  toggleReasoning,
} from "../src/state.js";
import type { Draft } from "../src/state.js";
import type { Item } from "../src/schema.js";

const item: Item = {
  scene_ref: { show: "demo", episode_id: "e01", scene_index: 0 },
  speaker_id: "P1",
  candidates: ["alice", "bob", "carol"],
  lines: [
    { kind: "scene", text: "[Scene: a kitchen]" },
    { kind: "dialogue", speaker_id: "P0", text: "hello there" },
    { kind: "dialogue", speaker_id: "P1", text: "hi yourself" },
  ],
};

describe("draft validation", () => {
  it("starts unsubmittable", () => {
    expect(canSubmit(emptyDraft(), item)).toBe(false);
  });

  it("blocks fact without a subtype before any request is made", () => {
    let d = setGuess(emptyDraft(), "alice");
    d = toggleEvidence(d, "fact");
    const problems = draftProblems(d, item);
    expect(problems.some((p) => p.includes("subtype"))).toBe(true);
    expect(canSubmit(d, item)).toBe(false);
    d = setFine(d, "fact", "attribute");
    expect(draftProblems(d, item)).toEqual([]);
    expect(canSubmit(d, item)).toBe(true);
  });

  it("blocks inside_scene without a subtype", () => {
    let d = setGuess(emptyDraft(), "bob");
    d = toggleEvidence(d, "inside_scene");
    expect(canSubmit(d, item)).toBe(false);
    d = setFine(d, "inside_scene", "mention");
    expect(canSubmit(d, item)).toBe(true);
  });

  it("clearing a subtype re-blocks submission", () => {
    let d = setGuess(emptyDraft(), "alice");
    d = toggleEvidence(d, "fact");
    d = setFine(d, "fact", "status");
    expect(canSubmit(d, item)).toBe(true);
    d = setFine(d, "fact", "");
    expect(canSubmit(d, item)).toBe(false);
  });

  it("rejects a subtype on categories that do not take one", () => {
    const d: Draft = {
      guess: "alice",
      evidence: [{ coarse: "personality", fine: "attribute" }],
      dependency: "none",
      reasoning: [],
    };
    expect(draftProblems(d, item).some((p) => p.includes("does not take"))).toBe(true);
  });

  it("rejects subtypes outside the allowed set", () => {
    const d: Draft = {
      guess: "alice",
      evidence: [{ coarse: "fact", fine: "vibes" }],
      dependency: "none",
      reasoning: [],
    };
    expect(canSubmit(d, item)).toBe(false);
  });

  it("requires at least one evidence tag", () => {
    const d = setGuess(emptyDraft(), "alice");
    expect(draftProblems(d, item).some((p) => p.includes("evidence"))).toBe(true);
  });

  it("requires the guess to be one of the candidates", () => {
    let d = setGuess(emptyDraft(), "zelda");
    d = toggleEvidence(d, "personality");
    expect(draftProblems(d, item).some((p) => p.includes("candidates"))).toBe(true);
  });

  it("toggling evidence twice removes the tag", () => {
    let d = toggleEvidence(emptyDraft(), "memory");
    expect(d.evidence).toHaveLength(1);
    d = toggleEvidence(d, "memory");
    expect(d.evidence).toHaveLength(0);
  });

  it("tracks dependency and reasoning picks", () => {
    let d = setDependency(emptyDraft(), "direct");
    expect(d.dependency).toBe("direct");
    d = toggleReasoning(d, "commonsense");
    d = toggleReasoning(d, "multihop_textual");
    expect(d.reasoning).toEqual(["commonsense", "multihop_textual"]);
    d = toggleReasoning(d, "commonsense");
    expect(d.reasoning).toEqual(["multihop_textual"]);
  });

  it("does not mutate the previous draft", () => {
    const before = setGuess(emptyDraft(), "alice");
    const after = toggleEvidence(before, "fact");
    expect(before.evidence).toHaveLength(0);
    expect(after.evidence).toHaveLength(1);
  });
});

describe("session progress", () => {
  it("accumulates accuracy while answers are revealed", () => {
    let p = emptyProgress();
    p = recordResult(p, true);
    p = recordResult(p, false);
    p = recordResult(p, true);
    expect(p.answered).toBe(3);
    expect(accuracy(p)).toBeCloseTo(2 / 3, 12);
  });

  it("hides accuracy once the server stops revealing correctness", () => {
    let p = emptyProgress();
    p = recordResult(p, true);
    p = recordResult(p, null);
    expect(accuracy(p)).toBeNull();
  });

  it("has no accuracy before any answer", () => {
    expect(accuracy(emptyProgress())).toBeNull();
  });
});
