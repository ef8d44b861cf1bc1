/** DOM construction for the annotation screen. Framework-free: every state
 * change re-renders the whole item view from the current draft.
 */

import { COARSE, DEPENDENCY, FINE, REASONING } from "./schema.js";
import type { Coarse, Dependency, Item, Reasoning } from "./schema.js";
import { canSubmit, draftProblems, hasEvidence, accuracy } from "./state.js";
import type { Draft, Progress } from "./state.js";

export interface Handlers {
  onGuess(name: string): void;
  onToggleEvidence(coarse: Coarse): void;
  onSetFine(coarse: Coarse, fine: string): void;
  onDependency(dependency: Dependency): void;
  onToggleReasoning(step: Reasoning): void;
  onSubmit(): void;
}

/** Stable per-speaker style hook: P0 -> sp-0, ..., P5 -> sp-5. */
export function speakerClass(speakerId: string): string {
  const m = /(\d+)$/.exec(speakerId);
  const idx = m ? Number(m[1]) % 6 : 0;
  return `sp-${idx}`;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function renderTranscript(item: Item): HTMLElement {
  const box = el("div", "transcript");
  for (const line of item.lines) {
    if (line.kind === "dialogue" && line.speaker_id) {
      const target = line.speaker_id === item.speaker_id;
      const row = el("p", target ? "line line--target" : "line");
      const chip = el("span", `chip ${speakerClass(line.speaker_id)}`, line.speaker_id);
      row.appendChild(chip);
      row.appendChild(document.createTextNode(` ${line.text}`));
      box.appendChild(row);
    } else {
      box.appendChild(el("p", `line line--${line.kind}`, line.text));
    }
  }
  return box;
}

function renderGuesses(item: Item, draft: Draft, handlers: Handlers): HTMLElement {
  const box = el("fieldset", "guesses");
  box.appendChild(el("legend", "", `Who is ${item.speaker_id}?`));
  for (const name of item.candidates) {
    const btn = el("button", "guess", name);
    btn.type = "button";
    btn.dataset.name = name;
    if (draft.guess === name) btn.classList.add("guess--picked");
    btn.addEventListener("click", () => handlers.onGuess(name));
    box.appendChild(btn);
  }
  return box;
}

function renderEvidence(draft: Draft, handlers: Handlers): HTMLElement {
  const box = el("fieldset", "evidence");
  box.appendChild(el("legend", "", "Evidence used"));
  for (const coarse of COARSE) {
    const row = el("label", "evidence-row");
    const check = el("input") as HTMLInputElement;
    check.type = "checkbox";
    check.className = "evidence";
    check.dataset.coarse = coarse;
    check.checked = hasEvidence(draft, coarse);
    check.addEventListener("change", () => handlers.onToggleEvidence(coarse));
    row.appendChild(check);
    row.appendChild(el("span", "", coarse.replace("_", " ")));
    const subtypes = FINE[coarse];
    if (subtypes && check.checked) {
      const select = el("select", "fine") as HTMLSelectElement;
      select.dataset.coarse = coarse;
      const blank = el("option", "", "pick a subtype");
      blank.setAttribute("value", "");
      select.appendChild(blank);
      for (const fine of subtypes) {
        const opt = el("option", "", fine);
        opt.setAttribute("value", fine);
        select.appendChild(opt);
      }
      const current = draft.evidence.find((t) => t.coarse === coarse);
      select.value = current?.fine ?? "";
      select.addEventListener("change", () => handlers.onSetFine(coarse, select.value));
      row.appendChild(select);
    }
    box.appendChild(row);
  }
  return box;
}

function renderDependency(draft: Draft, handlers: Handlers): HTMLElement {
  const box = el("fieldset", "dependency");
  box.appendChild(el("legend", "", "Depends on earlier guesses?"));
  for (const dep of DEPENDENCY) {
    const row = el("label", "dependency-row");
    const radio = el("input") as HTMLInputElement;
    radio.type = "radio";
    radio.name = "dependency";
    radio.className = "dependency";
    radio.value = dep;
    radio.checked = draft.dependency === dep;
    radio.addEventListener("change", () => handlers.onDependency(dep));
    row.appendChild(radio);
    row.appendChild(el("span", "", dep));
    box.appendChild(row);
  }
  return box;
}

function renderReasoning(draft: Draft, handlers: Handlers): HTMLElement {
  const box = el("fieldset", "reasoning");
  box.appendChild(el("legend", "", "Reasoning involved"));
  for (const step of REASONING) {
    const row = el("label", "reasoning-row");
    const check = el("input") as HTMLInputElement;
    check.type = "checkbox";
    check.className = "reasoning";
    check.dataset.step = step;
    check.checked = draft.reasoning.includes(step);
    check.addEventListener("change", () => handlers.onToggleReasoning(step));
    row.appendChild(check);
    row.appendChild(el("span", "", step.replace(/_/g, " ")));
    box.appendChild(row);
  }
  return box;
}

function renderProgress(item: Item, cursor: number, total: number, progress: Progress): HTMLElement {
  const bar = el("div", "progress");
  const ref = item.scene_ref;
  bar.appendChild(
    el("span", "progress-where", `${ref.show} ${ref.episode_id} scene ${ref.scene_index}`),
  );
  bar.appendChild(el("span", "progress-count", `item ${cursor + 1} of ${total}`));
  const acc = accuracy(progress);
  if (acc !== null && progress.answered > 0) {
    bar.appendChild(
      el("span", "progress-accuracy", `${progress.correct}/${progress.answered} correct`),
    );
  }
  return bar;
}

export function renderItemView(
  root: HTMLElement,
  item: Item,
  cursor: number,
  total: number,
  draft: Draft,
  progress: Progress,
  handlers: Handlers,
): void {
  root.textContent = "";
  root.appendChild(renderProgress(item, cursor, total, progress));
  root.appendChild(renderTranscript(item));
  const form = el("div", "answer-form");
  form.appendChild(renderGuesses(item, draft, handlers));
  form.appendChild(renderEvidence(draft, handlers));
  form.appendChild(renderDependency(draft, handlers));
  form.appendChild(renderReasoning(draft, handlers));
  const problems = draftProblems(draft, item);
  const list = el("ul", "problems");
  list.id = "problems";
  for (const p of problems) {
    list.appendChild(el("li", "", p));
  }
  form.appendChild(list);
  const submit = el("button", "submit", "Submit answer");
  submit.type = "button";
  submit.id = "submit";
  submit.disabled = !canSubmit(draft, item);
  submit.addEventListener("click", () => handlers.onSubmit());
  form.appendChild(submit);
  root.appendChild(form);
}

export function renderFeedback(
  root: HTMLElement,
  correct: boolean | null,
  warnings: string[],
): void {
  const old = root.querySelector(".banner");
  if (old) old.remove();
  const kind = correct === null ? "banner--recorded" : correct ? "banner--right" : "banner--wrong";
  const text =
    correct === null ? "Answer recorded." : correct ? "Correct!" : "Not this time.";
  const banner = el("div", `banner ${kind}`, text);
  for (const w of warnings) {
    banner.appendChild(el("p", "banner-warning", w));
  }
  root.prepend(banner);
}

export function renderError(root: HTMLElement, detail: string, problems: string[]): void {
  const old = root.querySelector(".banner");
  if (old) old.remove();
  const banner = el("div", "banner banner--error", detail);
  for (const p of problems) {
    banner.appendChild(el("p", "banner-warning", p));
  }
  root.prepend(banner);
}

export function renderDone(root: HTMLElement, progress: Progress, summaryText: string): void {
  root.textContent = "";
  const box = el("div", "done");
  box.appendChild(el("h2", "", "Session complete"));
  const acc = accuracy(progress);
  const line =
    acc === null
      ? `${progress.answered} answers recorded.`
      : `${progress.correct}/${progress.answered} correct (${(acc * 100).toFixed(1)}%).`;
  box.appendChild(el("p", "done-score", line));
  if (summaryText) {
    box.appendChild(el("pre", "done-summary", summaryText));
  }
  root.appendChild(box);
}
