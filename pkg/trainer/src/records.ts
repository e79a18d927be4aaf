/** Manifest and training-record IO for the trainer contract.
 *
 * The trainer is driven entirely by a manifest JSON file naming the record
 * files, the task mode, the loss weight alpha, and where to write metrics.
 * Any deviation from the contract raises ContractError, which the CLI turns
 * into an error JSON on stderr and a nonzero exit.
 */

import * as fs from "node:fs";

export const TASK_ANSWER = "qta";
export const TASK_REASONING = "qtr";

export const MODES = ["st", "mt_re", "mt_ra", "mt_cot"] as const;
export type Mode = (typeof MODES)[number];

/** A single supervised pair: model input text and target text for one task. */
export interface TrainRecord {
  id: string;
  task: string;
  input: string;
  target: string;
}

/** The training request handed to the trainer as a JSON file. */
export interface Manifest {
  train_records: string;
  dev_records: string;
  alpha: number;
  mode: Mode;
  seed: number;
  model_tag: string;
  out_dir: string;
  metrics_path: string;
}

/** Violation of the trainer contract (bad manifest, malformed records). */
export class ContractError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ContractError";
  }
}

function requireString(raw: Record<string, unknown>, key: string): string {
  const value = raw[key];
  if (typeof value !== "string" || value === "") {
    throw new ContractError(`manifest field '${key}' must be a non-empty string`);
  }
  return value;
}

export function loadManifest(path: string): Manifest {
  let text: string;
  try {
    text = fs.readFileSync(path, "utf8");
  } catch {
    throw new ContractError(`cannot read manifest file '${path}'`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new ContractError(`manifest is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ContractError("manifest must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;

  const alpha = obj["alpha"];
  if (typeof alpha !== "number" || !Number.isFinite(alpha) || alpha <= 0 || alpha > 1) {
    throw new ContractError("manifest field 'alpha' must be a number in (0, 1]");
  }
  const mode = obj["mode"];
  if (typeof mode !== "string" || !(MODES as readonly string[]).includes(mode)) {
    throw new ContractError(`manifest field 'mode' must be one of ${MODES.join(", ")}`);
  }
  if (mode === "st" && alpha !== 1) {
    throw new ContractError("mode 'st' requires alpha = 1");
  }
  const seed = obj["seed"];
  if (typeof seed !== "number" || !Number.isInteger(seed) || seed < 0) {
    throw new ContractError("manifest field 'seed' must be a non-negative integer");
  }

  const manifest: Manifest = {
    train_records: requireString(obj, "train_records"),
    dev_records: requireString(obj, "dev_records"),
    alpha,
    mode: mode as Mode,
    seed,
    model_tag: requireString(obj, "model_tag"),
    out_dir: requireString(obj, "out_dir"),
    metrics_path: requireString(obj, "metrics_path"),
  };
  for (const key of ["train_records", "dev_records"] as const) {
    if (!fs.existsSync(manifest[key])) {
      throw new ContractError(`manifest field '${key}' names a missing file: ${manifest[key]}`);
    }
  }
  return manifest;
}

/** Read one JSONL file of training records, validating each line. */
export function loadRecords(path: string): TrainRecord[] {
  let text: string;
  try {
    text = fs.readFileSync(path, "utf8");
  } catch {
    throw new ContractError(`cannot read record file '${path}'`);
  }
  const records: TrainRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line.trim() === "") {
      continue;
    }
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new ContractError(`${path}:${i + 1}: line is not valid JSON`);
    }
    if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
      throw new ContractError(`${path}:${i + 1}: record must be a JSON object`);
    }
    const obj = raw as Record<string, unknown>;
    for (const key of ["id", "task", "input", "target"]) {
      if (typeof obj[key] !== "string") {
        throw new ContractError(`${path}:${i + 1}: record field '${key}' must be a string`);
      }
    }
    const task = obj["task"] as string;
    if (task !== TASK_ANSWER && task !== TASK_REASONING) {
      throw new ContractError(
        `${path}:${i + 1}: record field 'task' must be '${TASK_ANSWER}' or '${TASK_REASONING}'`,
      );
    }
    records.push({
      id: obj["id"] as string,
      task,
      input: obj["input"] as string,
      target: obj["target"] as string,
    });
  }
  return records;
}

export function filterTask(records: TrainRecord[], task: string): TrainRecord[] {
  return records.filter((r) => r.task === task);
}
