import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { Manifest, TrainRecord } from "../src/records.js";
import { Rng, makeRng, nextInt } from "../src/rng.js";

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

export function writeRecords(filePath: string, records: TrainRecord[]): void {
  fs.writeFileSync(filePath, records.map((r) => JSON.stringify(r) + "\n").join(""), "utf8");
}

const ALPHABET = "abcdefgh";

function randomWord(rng: Rng): string {
  const length = 3 + nextInt(rng, 3);
  let word = "";
  for (let i = 0; i < length; i++) {
    word += ALPHABET[nextInt(rng, ALPHABET.length)];
  }
  return word;
}

export function reverseWord(word: string): string {
  return [...word].reverse().join("");
}

/**
 * A toy corpus in the emitted-record format: the answer task copies the word,
 * the reasoning task reverses it. Dev words are disjoint from train words.
 */
export function copyCorpus(
  trainCount: number,
  devCount: number,
  seed: number,
  withReasoning = true,
): { train: TrainRecord[]; dev: TrainRecord[] } {
  const rng = makeRng(seed);
  const seen = new Set<string>();
  const words: string[] = [];
  while (words.length < trainCount + devCount) {
    const word = randomWord(rng);
    if (!seen.has(word)) {
      seen.add(word);
      words.push(word);
    }
  }
  const train: TrainRecord[] = [];
  for (let i = 0; i < trainCount; i++) {
    const word = words[i];
    const id = `train-${String(i).padStart(3, "0")}`;
    train.push({ id, task: "qta", input: `answer: ${word}`, target: word });
    if (withReasoning && i % 2 === 0) {
      train.push({ id, task: "qtr", input: `explain: ${word}`, target: reverseWord(word) });
    }
  }
  const dev: TrainRecord[] = [];
  for (let i = 0; i < devCount; i++) {
    const word = words[trainCount + i];
    dev.push({ id: `dev-${String(i).padStart(3, "0")}`, task: "qta", input: `answer: ${word}`, target: word });
  }
  return { train, dev };
}

export interface CorpusFiles {
  dir: string;
  trainPath: string;
  devPath: string;
}

export function writeCorpus(
  prefix: string,
  train: TrainRecord[],
  dev: TrainRecord[],
): CorpusFiles {
  const dir = tmpDir(prefix);
  const trainPath = path.join(dir, "train.jsonl");
  const devPath = path.join(dir, "dev.jsonl");
  writeRecords(trainPath, train);
  writeRecords(devPath, dev);
  return { dir, trainPath, devPath };
}

export function makeManifest(files: CorpusFiles, overrides: Partial<Manifest> = {}): Manifest {
  const outDir = path.join(files.dir, "out");
  return {
    train_records: files.trainPath,
    dev_records: files.devPath,
    alpha: 0.5,
    mode: "mt_cot",
    seed: 7,
    model_tag: "test-model",
    out_dir: outDir,
    metrics_path: path.join(outDir, "metrics.json"),
    ...overrides,
  };
}

export function writeManifest(manifest: Manifest, filePath?: string): string {
  const target = filePath ?? path.join(tmpDir("manifest-"), "manifest.json");
  fs.writeFileSync(target, JSON.stringify(manifest, null, 2) + "\n", "utf8");
  return target;
}

export const CLI_PATH = path.resolve(import.meta.dirname, "..", "dist", "cli.js");

export function requireBuiltCli(): string {
  if (!fs.existsSync(CLI_PATH)) {
    throw new Error(`compiled CLI missing at ${CLI_PATH}; run 'npm run build' first`);
  }
  return CLI_PATH;
}
