// Runs an input script through the real hand + sampler pipeline and dumps
// the resulting pose tape as JSON, for drivers that feed a live session.

import { readFileSync, writeFileSync } from "node:fs";

import type { InputScript } from "../src/script.js";
import { runScript } from "../src/script.js";

const [scriptPath, outPath] = process.argv.slice(2);
if (scriptPath === undefined || outPath === undefined) {
  console.error("usage: record_poses <script.json> <poses.json>");
  process.exit(2);
}
const script = JSON.parse(readFileSync(scriptPath, "utf8")) as InputScript;
writeFileSync(outPath, JSON.stringify(runScript(script)));
