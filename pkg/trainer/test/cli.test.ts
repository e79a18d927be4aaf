import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { DEFAULT_HYPER } from "../src/train.js";
import {
  copyCorpus,
  makeManifest,
  requireBuiltCli,
  tmpDir,
  writeCorpus,
  writeManifest,
} from "./helpers.js";

function runCli(args: string[]) {
  const proc = spawnSync("node", [requireBuiltCli(), ...args], { encoding: "utf8" });
  return { status: proc.status, stdout: proc.stdout, stderr: proc.stderr };
}

function lastStderrJson(stderr: string): { error: string; detail: string } {
  const lines = stderr.trim().split("\n");
  return JSON.parse(lines[lines.length - 1]);
}

describe("command line", () => {
  it("fails with an error JSON when called without arguments", () => {
    const result = runCli([]);
    expect(result.status).toBe(2);
    const err = lastStderrJson(result.stderr);
    expect(err.error).toBe("ContractError");
    expect(err.detail).toContain("usage");
  });

  it("rejects a contract-violating manifest with a nonzero exit", () => {
    const { train, dev } = copyCorpus(6, 2, 41);
    const files = writeCorpus("cli-bad-", train, dev);
    const manifest = makeManifest(files, { alpha: 5 as number });
    const manifestPath = writeManifest(manifest, path.join(files.dir, "manifest.json"));
    const result = runCli([manifestPath]);
    expect(result.status).toBe(2);
    const err = lastStderrJson(result.stderr);
    expect(err.error).toBe("ContractError");
    expect(err.detail).toContain("alpha");
  });

  it("trains from a manifest and predicts from the saved model", () => {
    const { train, dev } = copyCorpus(12, 3, 42);
    const files = writeCorpus("cli-train-", train, dev);
    const manifest = makeManifest(files, { alpha: 0.5, mode: "mt_re", seed: 4 });
    const manifestPath = writeManifest(manifest, path.join(files.dir, "manifest.json"));

    const trainResult = runCli([manifestPath]);
    expect(trainResult.stderr).toBe("");
    expect(trainResult.status).toBe(0);
    expect(trainResult.stdout).toContain("model.json");
    const metrics = JSON.parse(fs.readFileSync(manifest.metrics_path, "utf8"));
    expect(metrics.losses).toHaveLength(DEFAULT_HYPER.epochs);

    const inputsPath = path.join(files.dir, "inputs.jsonl");
    fs.writeFileSync(inputsPath, JSON.stringify({ id: "q-1", input: train[0].input }) + "\n", "utf8");
    const outPath = path.join(files.dir, "generations.jsonl");
    const modelPath = path.join(manifest.out_dir, "model.json");
    const predictResult = runCli(["predict", modelPath, inputsPath, outPath]);
    expect(predictResult.status).toBe(0);
    const rows = fs
      .readFileSync(outPath, "utf8")
      .split("\n")
      .filter((line) => line !== "")
      .map((line) => JSON.parse(line));
    expect(rows).toHaveLength(1);
    expect(rows[0].id).toBe("q-1");
    expect(typeof rows[0].generation).toBe("string");
  });

  it("rejects a predict call with the wrong arity", () => {
    const result = runCli(["predict", "model.json"]);
    expect(result.status).toBe(2);
    expect(lastStderrJson(result.stderr).detail).toContain("predict");
  });
});

describe("orchestrated copy task", () => {
  it(
    "reaches at least 95% dev accuracy through the manifest contract",
    () => {
      const cliPath = requireBuiltCli();
      const { train, dev } = copyCorpus(200, 40, 101);
      const files = writeCorpus("copytask-", train, dev);
      const outDir = path.join(tmpDir("copyout-"), "cell");

      const script = [
        "import json, sys",
        "from exdistill.orchestrate import TrainJob, run_trainer",
        "train, dev, out, cli = sys.argv[1:5]",
        "job = TrainJob(train_records=train, dev_records=dev, alpha=0.5,",
        "               mode='mt_cot', seed=7, model_tag='copy-task')",
        "metrics = run_trainer(['node', cli], job, out)",
        "print(json.dumps({'dev_accuracy': metrics['dev_accuracy'],",
        "                  'epochs': len(metrics['losses'])}))",
      ].join("\n");
      const proc = spawnSync(
        "python3",
        ["-c", script, files.trainPath, files.devPath, outDir, cliPath],
        { encoding: "utf8", timeout: 280_000 },
      );
      expect(proc.stderr).toBe("");
      expect(proc.status).toBe(0);

      const summary = JSON.parse(proc.stdout.trim().split("\n").pop() as string);
      expect(summary.epochs).toBe(DEFAULT_HYPER.epochs);
      expect(summary.dev_accuracy).toBeGreaterThanOrEqual(0.95);

      const metrics = JSON.parse(fs.readFileSync(path.join(outDir, "metrics.json"), "utf8"));
      expect(metrics.dev_accuracy).toBe(summary.dev_accuracy);
      const first = metrics.losses[0];
      const last = metrics.losses[metrics.losses.length - 1];
      expect(last.loss_mt).toBeLessThan(first.loss_mt);
    },
    300_000,
  );
});
