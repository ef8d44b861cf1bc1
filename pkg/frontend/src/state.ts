/** Pure draft-answer state: what the annotator has picked so far and
 * whether it is complete enough to submit.
 *
 * Mirrors the server's validation rules so incomplete answers are blocked
 * before they ever hit the wire; the server remains the final arbiter.
 */

import { COARSE, DEPENDENCY, FINE, REASONING } from "./schema.js";
import type { Coarse, Dependency, EvidenceTag, Item, Reasoning } from "./schema.js";

export interface Draft {
  guess: string | null;
  evidence: EvidenceTag[];
  dependency: Dependency;
  reasoning: Reasoning[];
}

export function emptyDraft(): Draft {
  return { guess: null, evidence: [], dependency: "none", reasoning: [] };
}

function isCoarse(value: string): value is Coarse {
  return (COARSE as readonly string[]).includes(value);
}

/** Everything that still blocks submission, in display order. */
export function draftProblems(draft: Draft, item: Item): string[] {
  const problems: string[] = [];
  if (draft.guess === null) {
    problems.push("pick a guess for the highlighted speaker");
  } else if (!item.candidates.includes(draft.guess)) {
    problems.push(`guess ${draft.guess} is not one of the candidates`);
  }
  if (draft.evidence.length === 0) {
    problems.push("tag at least one kind of evidence");
  }
  const seen = new Set<string>();
  for (const tag of draft.evidence) {
    if (!isCoarse(tag.coarse)) {
      problems.push(`unknown evidence category ${tag.coarse}`);
      continue;
    }
    const allowed = FINE[tag.coarse];
    if (allowed) {
      if (tag.fine === undefined) {
        problems.push(`${tag.coarse} requires a subtype (${allowed.join(", ")})`);
      } else if (!allowed.includes(tag.fine)) {
        problems.push(`${tag.fine} is not a subtype of ${tag.coarse}`);
      }
    } else if (tag.fine !== undefined) {
      problems.push(`${tag.coarse} does not take a subtype`);
    }
    const key = `${tag.coarse}:${tag.fine ?? ""}`;
    if (seen.has(key)) {
      problems.push(`duplicate evidence tag ${tag.coarse}`);
    }
    seen.add(key);
  }
  if (!(DEPENDENCY as readonly string[]).includes(draft.dependency)) {
    problems.push(`unknown dependency ${draft.dependency}`);
  }
  for (const step of draft.reasoning) {
    if (!(REASONING as readonly string[]).includes(step)) {
      problems.push(`unknown reasoning kind ${step}`);
    }
  }
  return problems;
}

export function canSubmit(draft: Draft, item: Item): boolean {
  return draftProblems(draft, item).length === 0;
}

export function setGuess(draft: Draft, guess: string): Draft {
  return { ...draft, guess };
}

/** Toggle a coarse category on or off; switching on starts without a subtype. */
export function toggleEvidence(draft: Draft, coarse: Coarse): Draft {
  const present = draft.evidence.some((t) => t.coarse === coarse);
  const evidence = present
    ? draft.evidence.filter((t) => t.coarse !== coarse)
    : [...draft.evidence, { coarse }];
  return { ...draft, evidence };
}

export function hasEvidence(draft: Draft, coarse: Coarse): boolean {
  return draft.evidence.some((t) => t.coarse === coarse);
}

export function setFine(draft: Draft, coarse: Coarse, fine: string): Draft {
  const evidence = draft.evidence.map((t) =>
    t.coarse === coarse ? (fine === "" ? { coarse } : { coarse, fine }) : t,
  );
  return { ...draft, evidence };
}

export function setDependency(draft: Draft, dependency: Dependency): Draft {
  return { ...draft, dependency };
}

export function toggleReasoning(draft: Draft, step: Reasoning): Draft {
  const reasoning = draft.reasoning.includes(step)
    ? draft.reasoning.filter((s) => s !== step)
    : [...draft.reasoning, step];
  return { ...draft, reasoning };
}

/** Running tally across the session; correct stays null with reveal off. */
export interface Progress {
  answered: number;
  correct: number;
  revealed: boolean;
}

export function emptyProgress(): Progress {
  return { answered: 0, correct: 0, revealed: true };
}

export function recordResult(progress: Progress, correct: boolean | null): Progress {
  return {
    answered: progress.answered + 1,
    correct: progress.correct + (correct === true ? 1 : 0),
    revealed: progress.revealed && correct !== null,
  };
}

export function accuracy(progress: Progress): number | null {
  if (!progress.revealed || progress.answered === 0) {
    return null;
  }
  return progress.correct / progress.answered;
}
