import { EngineApi } from "./api.js";
import { Console } from "./console.js";

const root = document.getElementById("console-root");
if (root) {
  const api = new EngineApi("");
  void new Console(root, api).start();
}
