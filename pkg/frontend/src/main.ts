/** Entry point: wires the start form, the answer loop, and the finish view. */

import { ApiError, StudyClient } from "./api.js";
import type { AnswerPayload, NextResponse } from "./schema.js";
import {
  emptyDraft,
  emptyProgress,
  recordResult,
  setDependency,
  setFine,
  setGuess,
  toggleEvidence,
  toggleReasoning,
} from "./state.js";
import type { Draft, Progress } from "./state.js";
import { renderDone, renderError, renderFeedback, renderItemView } from "./render.js";
import type { Handlers } from "./render.js";

const client = new StudyClient("");

let app: HTMLElement;
let annotatorId = "";
let sessionId = "";
let current: NextResponse | null = null;
let draft: Draft = emptyDraft();
let progress: Progress = emptyProgress();

const handlers: Handlers = {
  onGuess: (name) => update(setGuess(draft, name)),
  onToggleEvidence: (coarse) => update(toggleEvidence(draft, coarse)),
  onSetFine: (coarse, fine) => update(setFine(draft, coarse, fine)),
  onDependency: (dep) => update(setDependency(draft, dep)),
  onToggleReasoning: (step) => update(toggleReasoning(draft, step)),
  onSubmit: () => void submit(),
};

function update(next: Draft): void {
  draft = next;
  rerender();
}

function rerender(): void {
  if (!current) return;
  renderItemView(app, current.item, current.cursor, current.total, draft, progress, handlers);
}

async function start(): Promise<void> {
  const annotator = (document.getElementById("annotator") as HTMLInputElement).value.trim();
  const show = (document.getElementById("show") as HTMLInputElement).value.trim();
  const seed = Number((document.getElementById("seed") as HTMLInputElement).value) || 0;
  try {
    const info = await client.createSession(annotator, show, seed);
    annotatorId = annotator;
    sessionId = info.session_id;
    progress = emptyProgress();
    (document.getElementById("start-form") as HTMLElement).hidden = true;
    await loadNext();
  } catch (err) {
    showError(err);
  }
}

async function loadNext(): Promise<void> {
  try {
    current = await client.nextItem(sessionId);
    draft = emptyDraft();
    rerender();
  } catch (err) {
    if (err instanceof ApiError && err.errorName === "SessionExhausted") {
      await finish();
      return;
    }
    showError(err);
  }
}

async function submit(): Promise<void> {
  if (!current) return;
  const item = current.item;
  const payload: AnswerPayload = {
    scene_ref: item.scene_ref,
    speaker_id: item.speaker_id,
    annotator_id: annotatorId,
    guess: draft.guess ?? "",
    evidence: draft.evidence,
    dependency: draft.dependency,
    reasoning: draft.reasoning,
  };
  try {
    const result = await client.submitAnswer(sessionId, payload);
    progress = recordResult(progress, result.correct);
    await loadNext();
    renderFeedback(app, result.correct, result.warnings);
  } catch (err) {
    showError(err);
  }
}

async function finish(): Promise<void> {
  current = null;
  let summaryText = "";
  try {
    const summary = await client.summary();
    summaryText = JSON.stringify(summary.accuracy, null, 2);
  } catch {
    summaryText = "";
  }
  renderDone(app, progress, summaryText);
}

function showError(err: unknown): void {
  if (err instanceof ApiError) {
    renderError(app, err.message, err.problems);
  } else {
    renderError(app, String(err), []);
  }
}

function init(): void {
  app = document.getElementById("app") as HTMLElement;
  const button = document.getElementById("start") as HTMLButtonElement;
  button.addEventListener("click", () => void start());
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", init);
  } else {
    init();
  }
}
