import { JudgeApi } from "./api.js";
import { AnnotationApp } from "./app.js";

function tokenFromLocation(): string | null {
  const params = new URLSearchParams(window.location.search);
  return params.get("token");
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app element");
  }
  const token = tokenFromLocation() ?? window.prompt("Session token:") ?? "";
  const base = new URLSearchParams(window.location.search).get("api") ?? "";
  const app = new AnnotationApp(new JudgeApi(base), token, root);
  await app.start();
}

void boot();
