import { describe, expect, it } from "vitest";

import {
  BOS,
  EOS,
  PARAM_NAMES,
  buildVocab,
  cloneParams,
  decodeIds,
  encodeText,
  flattenParams,
  forwardSequence,
  greedyDecode,
  initParams,
  type Dims,
  type Params,
} from "../src/model.js";
import { computeGradients } from "../src/train.js";
import { ContractError, TrainRecord } from "../src/records.js";
import { makeRng } from "../src/rng.js";

const REC = (input: string, target: string): TrainRecord => ({
  id: "r",
  task: "qta",
  input,
  target,
});

describe("vocabulary", () => {
  it("collects sorted unique characters after the two specials", () => {
    const vocab = buildVocab([[REC("cab", "bc")], [REC("d", "a")]]);
    expect(vocab.chars.slice(2)).toEqual(["a", "b", "c", "d"]);
    expect(vocab.index.get("a")).toBe(2);
    expect(BOS).toBe(0);
    expect(EOS).toBe(1);
  });

  it("round-trips text through encode and decode", () => {
    const vocab = buildVocab([[REC("abc", "cba")]]);
    const ids = encodeText(vocab, "bacab");
    expect(decodeIds(vocab, ids)).toBe("bacab");
  });

  it("rejects characters outside the vocabulary", () => {
    const vocab = buildVocab([[REC("ab", "ab")]]);
    expect(() => encodeText(vocab, "abz")).toThrow(ContractError);
  });
});

describe("parameter initialisation", () => {
  const dims: Dims = { vocabSize: 6, embedDim: 4, hiddenDim: 5 };

  it("is deterministic in the seed", () => {
    const a = flattenParams(initParams(dims, 0.1, makeRng(3)));
    const b = flattenParams(initParams(dims, 0.1, makeRng(3)));
    const c = flattenParams(initParams(dims, 0.1, makeRng(4)));
    expect(Array.from(a)).toEqual(Array.from(b));
    expect(Array.from(a)).not.toEqual(Array.from(c));
  });

  it("flattens every buffer in declaration order", () => {
    const params = initParams(dims, 0.1, makeRng(1));
    const flat = flattenParams(params);
    let total = 0;
    for (const name of PARAM_NAMES) total += params[name].length;
    expect(flat.length).toBe(total);
    expect(flat[0]).toBe(params.embedEnc[0]);
    expect(flat[flat.length - 1]).toBe(params.outB[params.outB.length - 1]);
  });
});

describe("backpropagation", () => {
  it("matches finite-difference gradients on every parameter", () => {
    const records = [REC("abc", "cb"), REC("ba", "aabc")];
    const vocab = buildVocab([records]);
    const dims: Dims = { vocabSize: vocab.chars.length, embedDim: 5, hiddenDim: 7 };
    const params = initParams(dims, 0.3, makeRng(11));
    const pairs = records.map((r) => ({
      inputIds: encodeText(vocab, r.input),
      targetIds: encodeText(vocab, r.target),
    }));
    const scale = 0.7;

    const lossOf = (p: Params): number => {
      let lossSum = 0;
      let tokens = 0;
      for (const pair of pairs) {
        const fwd = forwardSequence(p, dims, pair.inputIds, pair.targetIds);
        lossSum += fwd.lossSum;
        tokens += fwd.tokenCount;
      }
      return (scale * lossSum) / tokens;
    };

    const grads = computeGradients(params, dims, [{ pairs, scale }]);
    const epsilon = 1e-5;
    for (const name of PARAM_NAMES) {
      const buf = params[name];
      const gbuf = grads[name];
      for (let i = 0; i < buf.length; i++) {
        const saved = buf[i];
        buf[i] = saved + epsilon;
        const upper = lossOf(params);
        buf[i] = saved - epsilon;
        const lower = lossOf(params);
        buf[i] = saved;
        const numeric = (upper - lower) / (2 * epsilon);
        expect(Math.abs(gbuf[i] - numeric)).toBeLessThanOrEqual(1e-7 * (1 + Math.abs(numeric)));
      }
    }
  });
});

describe("greedy decoding", () => {
  it("is deterministic and bounded by the length limit", () => {
    const records = [REC("abcd", "dcba")];
    const vocab = buildVocab([records]);
    const dims: Dims = { vocabSize: vocab.chars.length, embedDim: 4, hiddenDim: 6 };
    const params = initParams(dims, 0.2, makeRng(5));
    const inputIds = encodeText(vocab, "abcd");
    const first = greedyDecode(params, dims, inputIds, 9);
    const second = greedyDecode(cloneParams(params), dims, inputIds, 9);
    expect(second).toEqual(first);
    expect(first.length).toBeLessThanOrEqual(9);
    expect(greedyDecode(params, dims, [], 9)).toEqual([]);
  });
});
