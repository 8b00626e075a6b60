import { ApiClient } from "./api.js";
import { ReportView } from "./report_view.js";
import { SessionView } from "./session_view.js";

function navigate(sessionId: string, view: "audit" | "report"): void {
  const url = new URL(window.location.href);
  url.searchParams.set("session", sessionId);
  url.searchParams.set("view", view);
  window.location.assign(url.toString());
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session");
  const view = params.get("view") ?? "audit";
  if (!sessionId) {
    root.textContent =
      "No session selected. Create one via POST /v1/sessions, then open ?session=<id>.";
    return;
  }
  const api = new ApiClient("");
  if (view === "report") {
    await new ReportView(api, sessionId, root).load();
  } else {
    await new SessionView(api, sessionId, root, () => navigate(sessionId, "report")).load();
  }
}

void boot();
