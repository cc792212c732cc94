import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

declare global {
  interface Window {
    PROMPTWARE_BASE_URL?: string;
  }
}

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app element");
}
createApp(root, new ApiClient(window.PROMPTWARE_BASE_URL ?? ""));
