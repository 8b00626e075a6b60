// Annotation fragment builders shared by the audit screen and the
// end-to-end tests, plus the pending-edit buffer used when a concurrent
// auditor wins a version race.

import type { AnnotationFragment, FactFlag, Session } from "./types.js";

export function factFragment(
  version: number,
  index: number,
  flag: FactFlag,
  value: boolean,
): AnnotationFragment {
  const entry: { index: number } & Partial<Record<FactFlag, boolean>> = { index, [flag]: value };
  if (flag === "supported_by_citation" && value) {
    // the service rejects supported-but-absent facts; a supporting citation
    // implies the fact exists in the corpus
    entry.present_in_any_retrieved_doc = true;
  }
  return { version, facts: [entry] };
}

export function urlFragment(version: number, url: string, relevant: boolean): AnnotationFragment {
  return { version, cited_urls: [{ url, relevant }] };
}

export function keywordFragment(version: number, text: string, relevant: boolean): AnnotationFragment {
  return { version, keywords: [{ text, relevant }] };
}

export function subquestionFragment(version: number, text: string, addressed: boolean): AnnotationFragment {
  return { version, subquestions: [{ text, addressed }] };
}

export function withVersion(fragment: AnnotationFragment, version: number): AnnotationFragment {
  return { ...fragment, version };
}

/** True once every fact judgment and URL relevance toggle has been entered. */
export function allJudgmentsEntered(session: Session): boolean {
  const factsDone = session.facts.every(
    (f) =>
      f.relevant !== null &&
      f.supported_by_citation !== null &&
      f.present_in_any_retrieved_doc !== null,
  );
  const urlsDone = session.cited_urls.every((u) => u.relevant !== null);
  return factsDone && urlsDone;
}

/** Edits rejected by a version conflict, kept for replay after reload. */
export class PendingEdits {
  private readonly queue: AnnotationFragment[] = [];

  stash(fragment: AnnotationFragment): void {
    this.queue.push(fragment);
  }

  get count(): number {
    return this.queue.length;
  }

  drain(): AnnotationFragment[] {
    return this.queue.splice(0, this.queue.length);
  }
}
