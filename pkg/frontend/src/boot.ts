import { initApp } from "./app.js";

const root = document.getElementById("root");
if (root) {
  initApp(root).catch((err) => {
    root.textContent = `Could not reach the review endpoint: ${err}`;
  });
}
