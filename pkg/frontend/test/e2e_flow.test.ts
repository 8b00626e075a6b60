// @vitest-environment node
//
// Cross-stack equivalence: a scripted annotation session driven through the
// UI's own client and fragment builders against a real service process must
// yield a live report and an exported JSONL whose eval-CLI output are
// numerically identical. Requires the `recite` CLI on PATH (pip install -e ..)
// and the built UI bundle in dist/ for the static-hosting check.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { existsSync, mkdtempSync } from "node:fs";
import { writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  factFragment,
  keywordFragment,
  subquestionFragment,
  urlFragment,
  withVersion,
} from "../src/fragments.js";

const execFileAsync = promisify(execFile);

const PORT = 8900 + Math.floor(Math.random() * 500);
const BASE = `http://127.0.0.1:${PORT}`;

const BUNDLE = {
  query: "How did the wheat crop perform and why was the cricket match delayed?",
  documents: [
    { id: "wheat", url: "https://example.com/wheat", retrieval_score: 0.82,
      text: "The wheat crop yield rose sharply after timely rains in the region." },
    { id: "cricket", url: "https://example.com/cricket", retrieval_score: 0.61,
      text: "The cricket match was delayed because heavy rain soaked the pitch." },
  ],
  answer: "The wheat crop yield rose sharply [2]. The cricket match was delayed by heavy rain [1].",
};

let service: ChildProcess;
let dataDir: string;

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      const response = await fetch(`${BASE}/v1/export`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("service did not become ready");
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "recite-e2e-"));
  const uiDir = join(import.meta.dirname, "..", "dist");
  const args = ["serve", "--port", String(PORT), "--data-dir", dataDir];
  if (existsSync(uiDir)) {
    args.push("--ui-dir", uiDir);
  }
  service = spawn("recite", args, { stdio: "ignore" });
  await waitForService();
});

afterAll(() => {
  service?.kill();
});

describe("scripted audit flow against the real service", () => {
  it("report equals eval CLI over the exported records", async () => {
    const api = new ApiClient(BASE);
    const { id } = await api.createSession(BUNDLE);

    let session = await api.getSession(id);
    expect(session.facts).toHaveLength(2);
    // correction moved the mis-cited first point to the wheat document
    expect(session.facts[0]!.citations).toEqual([0]);

    // scripted judgments through the UI's fragment builders: fact 0 fully
    // supported; fact 1 relevant but only incorrectly cited; one keyword
    // each way; one addressed subquestion; both URLs judged.
    let version = session.version;
    const script = [
      factFragment(version, 0, "relevant", true),
      factFragment(version, 0, "supported_by_citation", true),
      factFragment(version, 1, "relevant", true),
      factFragment(version, 1, "present_in_any_retrieved_doc", true),
      urlFragment(version, "https://example.com/wheat", true),
      urlFragment(version, "https://example.com/cricket", true),
      keywordFragment(version, "wheat", true),
      keywordFragment(version, "umpire", false),
      subquestionFragment(version, "why was the match delayed?", true),
    ];
    for (const fragment of script) {
      version = await api.putAnnotations(id, withVersion(fragment, version));
    }

    session = await api.getSession(id);
    expect(session.version).toBe(script.length);

    const live = await api.getReport(id);
    // correctness 1/2, keyword relevance 1/2: both gates fail; the
    // unsupported-but-present fact lands in the incorrectly-cited bucket
    expect(live.questions[0]!.metrics.correctness).toBe(0.5);
    expect(live.questions[0]!.incorrectly_cited).toBe(1);
    expect(live.questions[0]!.hallucinated).toBe(0);
    expect(live.questions[0]!.accuracy).toBe(0);

    const exported = await api.exportRecords();
    const exportPath = join(dataDir, "export.jsonl");
    await writeFile(exportPath, exported, "utf-8");
    const { stdout } = await execFileAsync("recite", [
      "eval", "--annotations", exportPath, "--json",
    ]);
    const cliReport = JSON.parse(stdout);

    expect(cliReport.mean_accuracy).toBe(live.mean_accuracy);
    expect(cliReport.total_incorrectly_cited).toBe(live.total_incorrectly_cited);
    expect(cliReport.total_hallucinated).toBe(live.total_hallucinated);
    expect(cliReport.questions).toEqual(live.questions);
  });

  it("serves the built UI shell statically", async () => {
    const uiDir = join(import.meta.dirname, "..", "dist");
    if (!existsSync(uiDir)) return; // bundle not built; hosting covered elsewhere
    const page = await fetch(`${BASE}/`);
    expect(page.status).toBe(200);
    expect(await page.text()).toContain("recite audit workbench");
    const script = await fetch(`${BASE}/main.js`);
    expect(script.status).toBe(200);
  });
});
