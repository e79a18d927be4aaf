/** Command-line entry point.
 *
 *   node dist/cli.js <manifest.json>
 *       Train per the manifest; write model.json into out_dir and the metrics
 *       JSON to metrics_path.
 *
 *   node dist/cli.js predict <model.json> <inputs.jsonl> <out.jsonl>
 *       Greedy generations for each {id, input} row, one {id, generation}
 *       JSON object per line.
 *
 * Contract violations and IO failures print {"error", "detail"} as JSON on
 * stderr and exit nonzero.
 */

import { ContractError, loadManifest } from "./records.js";
import { runPredict, runTraining } from "./train.js";

function fail(err: unknown): never {
  const name = err instanceof ContractError ? err.name : "TrainerError";
  const detail = err instanceof Error ? err.message : String(err);
  process.stderr.write(JSON.stringify({ error: name, detail }) + "\n");
  process.exit(2);
}

function main(argv: string[]): void {
  if (argv.length === 0) {
    fail(new ContractError("usage: cli.js <manifest.json> | cli.js predict <model.json> <inputs.jsonl> <out.jsonl>"));
  }
  if (argv[0] === "predict") {
    if (argv.length !== 4) {
      fail(new ContractError("usage: cli.js predict <model.json> <inputs.jsonl> <out.jsonl>"));
    }
    const count = runPredict(argv[1], argv[2], argv[3]);
    process.stdout.write(`wrote ${count} generations to ${argv[3]}\n`);
    return;
  }
  if (argv.length !== 1) {
    fail(new ContractError("usage: cli.js <manifest.json>"));
  }
  const manifest = loadManifest(argv[0]);
  const artifactPath = runTraining(manifest);
  process.stdout.write(`trained ${manifest.model_tag}; model at ${artifactPath}\n`);
}

try {
  main(process.argv.slice(2));
} catch (err) {
  fail(err);
}
