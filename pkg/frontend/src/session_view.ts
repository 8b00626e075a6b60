// Audit screen: the corrected answer fact by fact, side-by-side document
// panes, and the section 4-style judgment toggles. Every toggle persists
// immediately; the visual state only confirms after the server accepted
// the write. A 409 surfaces a reload prompt and keeps the rejected edit.

import { ConflictError, type AuditApi } from "./api.js";
import {
  PendingEdits,
  allJudgmentsEntered,
  factFragment,
  keywordFragment,
  subquestionFragment,
  urlFragment,
  withVersion,
} from "./fragments.js";
import type { AnnotationFragment, FactFlag, Session } from "./types.js";

const FACT_FLAGS: Array<{ flag: FactFlag; label: string }> = [
  { flag: "relevant", label: "relevant" },
  { flag: "supported_by_citation", label: "supported by citation" },
  { flag: "present_in_any_retrieved_doc", label: "present in any doc" },
];

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

export class SessionView {
  readonly pending = new PendingEdits();
  private session!: Session;

  constructor(
    private readonly api: AuditApi,
    private readonly sessionId: string,
    private readonly root: HTMLElement,
    private readonly onFinalize: () => void = () => {},
  ) {}

  async load(): Promise<void> {
    this.session = await this.api.getSession(this.sessionId);
    this.render();
    await this.refreshSummary();
  }

  /** Persist one fragment; re-render on success, prompt on conflict. */
  private async persist(fragment: AnnotationFragment): Promise<void> {
    try {
      const version = await this.api.putAnnotations(this.sessionId, fragment);
      this.session = await this.api.getSession(this.sessionId);
      this.session.version = version;
      this.render();
      await this.refreshSummary();
    } catch (error) {
      if (error instanceof ConflictError) {
        this.pending.stash(fragment);
        this.showConflict(error.currentVersion);
        return;
      }
      this.showError(error instanceof Error ? error.message : String(error));
    }
  }

  private showConflict(currentVersion: number): void {
    const banner = this.root.querySelector(".conflict-banner") as HTMLElement;
    banner.hidden = false;
    banner.textContent =
      `Another auditor updated this session (now at version ${currentVersion}). ` +
      `Reload to continue; ${this.pending.count} unsent edit(s) are kept and will be replayed.`;
    const reload = el("button", "reload-button", "Reload session");
    reload.addEventListener("click", () => void this.reloadAndReplay());
    banner.append(" ", reload);
  }

  private async reloadAndReplay(): Promise<void> {
    this.session = await this.api.getSession(this.sessionId);
    for (const fragment of this.pending.drain()) {
      this.session.version = await this.api.putAnnotations(
        this.sessionId,
        withVersion(fragment, this.session.version),
      );
    }
    this.session = await this.api.getSession(this.sessionId);
    this.render();
    await this.refreshSummary();
  }

  private showError(message: string): void {
    const banner = this.root.querySelector(".error-banner") as HTMLElement;
    banner.hidden = false;
    banner.textContent = message;
  }

  /** Live decomposition counters from the report endpoint (no local math). */
  private async refreshSummary(): Promise<void> {
    const report = await this.api.getReport(this.sessionId);
    const summary = this.root.querySelector(".live-summary") as HTMLElement;
    const q = report.questions[0];
    if (!q) return;
    summary.innerHTML = "";
    summary.append(
      el("span", "counter incorrectly-cited",
        `incorrectly cited: ${q.incorrectly_cited}`),
      el("span", "counter hallucinated", `hallucinated: ${q.hallucinated}`),
      el("span", `counter accuracy ${q.accuracy ? "pass" : "fail"}`,
        `question accuracy: ${q.accuracy}`),
    );
  }

  private render(): void {
    const session = this.session;
    this.root.innerHTML = "";
    this.root.append(
      el("div", "conflict-banner"),
      el("div", "error-banner"),
    );
    (this.root.querySelector(".conflict-banner") as HTMLElement).hidden = true;
    (this.root.querySelector(".error-banner") as HTMLElement).hidden = true;

    const header = el("header", "session-header");
    header.append(
      el("h1", "query", session.query),
      el("div", "live-summary"),
    );
    this.root.append(header);

    const columns = el("div", "columns");
    columns.append(this.renderAnswerColumn(), this.renderDocumentColumn());
    this.root.append(columns);
    this.root.append(this.renderUrlSection(), this.renderKeywordSection(),
      this.renderSubquestionSection(), this.renderFinalize());
  }

  private renderAnswerColumn(): HTMLElement {
    const session = this.session;
    const column = el("section", "answer-column");
    column.append(el("h2", undefined, "Corrected answer"));
    const answer = el("div", "answer");
    for (const fact of session.facts) {
      const span = el("span", "fact", fact.text + " ");
      span.dataset.index = String(fact.index);
      for (const citation of fact.citations) {
        const link = el("a", "citation-link", `[${citation + 1}]`);
        link.setAttribute("href", `#doc-${citation}`);
        span.append(link, " ");
      }
      answer.append(span);
    }
    column.append(answer);

    const list = el("ol", "fact-list");
    for (const fact of session.facts) {
      const item = el("li", "fact-item");
      item.dataset.index = String(fact.index);
      item.append(el("p", "fact-text", fact.text));
      const toggles = el("div", "fact-toggles");
      for (const { flag, label } of FACT_FLAGS) {
        toggles.append(this.factToggle(fact.index, flag, label,
          this.session.facts[fact.index]?.[flag] ?? null));
      }
      item.append(toggles);
      list.append(item);
    }
    column.append(list);
    return column;
  }

  private factToggle(index: number, flag: FactFlag, label: string,
                     state: boolean | null): HTMLElement {
    const wrapper = el("label", `toggle ${flag} ${state === null ? "unjudged" : state ? "yes" : "no"}`);
    const input = el("input") as HTMLInputElement;
    input.type = "checkbox";
    input.checked = state === true;
    input.dataset.factIndex = String(index);
    input.dataset.flag = flag;
    input.addEventListener("change", () => {
      void this.persist(factFragment(this.session.version, index, flag, input.checked));
    });
    wrapper.append(input, el("span", undefined, label));
    return wrapper;
  }

  private renderDocumentColumn(): HTMLElement {
    const column = el("section", "document-column");
    column.append(el("h2", undefined, "Retrieved documents"));
    for (const doc of this.session.documents) {
      const pane = el("article", "document-pane");
      pane.id = `doc-${doc.index}`;
      pane.append(
        el("h3", undefined, `[${doc.index + 1}] ${doc.id}`),
        el("p", "doc-meta", `score ${doc.retrieval_score}${doc.url ? ` - ${doc.url}` : ""}`),
        el("p", "doc-text", doc.text),
      );
      column.append(pane);
    }
    return column;
  }

  private renderUrlSection(): HTMLElement {
    const section = el("section", "url-section");
    section.append(el("h2", undefined, "Cited URLs"));
    for (const entry of this.session.cited_urls) {
      const row = el("label", `toggle url ${entry.relevant === null ? "unjudged" : ""}`);
      const input = el("input") as HTMLInputElement;
      input.type = "checkbox";
      input.checked = entry.relevant === true;
      input.dataset.url = entry.url;
      input.addEventListener("change", () => {
        void this.persist(urlFragment(this.session.version, entry.url, input.checked));
      });
      row.append(input, el("span", undefined, `${entry.url} relevant`));
      section.append(row);
    }
    return section;
  }

  private renderUpsertSection(
    title: string,
    cssClass: string,
    entries: Array<{ text: string; value: boolean }>,
    submit: (text: string, value: boolean) => void,
  ): HTMLElement {
    const section = el("section", cssClass);
    section.append(el("h2", undefined, title));
    for (const entry of entries) {
      const row = el("label", "toggle");
      const input = el("input") as HTMLInputElement;
      input.type = "checkbox";
      input.checked = entry.value;
      input.dataset.text = entry.text;
      input.addEventListener("change", () => submit(entry.text, input.checked));
      row.append(input, el("span", undefined, entry.text));
      section.append(row);
    }
    const adder = el("input", "adder") as HTMLInputElement;
    adder.type = "text";
    adder.placeholder = `add ${title.toLowerCase()}…`;
    adder.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter" && adder.value.trim()) {
        submit(adder.value.trim(), true);
        adder.value = "";
      }
    });
    section.append(adder);
    return section;
  }

  private renderKeywordSection(): HTMLElement {
    return this.renderUpsertSection(
      "Keywords", "keyword-section",
      this.session.keywords.map((k) => ({ text: k.text, value: k.relevant })),
      (text, value) => void this.persist(keywordFragment(this.session.version, text, value)),
    );
  }

  private renderSubquestionSection(): HTMLElement {
    return this.renderUpsertSection(
      "Sub-questions", "subquestion-section",
      this.session.subquestions.map((s) => ({ text: s.text, value: s.addressed })),
      (text, value) => void this.persist(subquestionFragment(this.session.version, text, value)),
    );
  }

  private renderFinalize(): HTMLElement {
    const footer = el("footer", "finalize-row");
    const button = el("button", "finalize", "Finalize and view report") as HTMLButtonElement;
    button.disabled = !allJudgmentsEntered(this.session);
    button.addEventListener("click", () => this.onFinalize());
    footer.append(button);
    if (button.disabled) {
      footer.append(el("span", "finalize-hint", "judge every fact and URL to finalize"));
    }
    return footer;
  }
}
