import { createApp } from "./ui.js";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}
void createApp(root).start();
