/**
 * TypeScript bindings for the `psda` speaker-verification backend.
 *
 * Every numeric result here is produced by the Python package itself: the
 * bindings write the same text formats a user would, invoke the `psda`
 * command, and parse the answer back. Nothing statistical is reimplemented
 * on this side (the cosine helper, a plain dot product, is the one
 * exception), so outputs agree with the core to the precision of a
 * 17-significant-digit text round trip — which for IEEE doubles is exact.
 *
 * Vectors are accepted as anything array-like of numbers. JavaScript
 * numbers are 64-bit floats already; passing a Float32Array therefore
 * up-converts to float64, which can differ slightly from scoring the
 * original float32 file with the CLI.
 *
 * Set PSDA_PYTHON to pick the interpreter that has `psda` installed
 * (default: `python3`).
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export type Vec = ArrayLike<number>;

/** A `psda` invocation that exited nonzero; the message is the core's stderr. */
export class PsdaError extends Error {
  readonly exitCode: number | null;

  constructor(exitCode: number | null, stderr: string) {
    super(stderr.trim() || `psda exited with code ${exitCode}`);
    this.name = "PsdaError";
    this.exitCode = exitCode;
  }
}

const PYTHON = process.env.PSDA_PYTHON ?? "python3";

/** Run `psda <args>` and return its stdout. Exposed for tests and escape hatches. */
export function cli(args: string[]): string {
  const out = spawnSync(PYTHON, ["-m", "psda.cli", ...args], {
    encoding: "utf8",
    maxBuffer: 1 << 26,
  });
  if (out.error) throw out.error;
  if (out.status !== 0) throw new PsdaError(out.status, out.stderr ?? "");
  return out.stdout;
}

function inTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "psda-ts-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

// String(x) is the shortest representation that parses back to the same
// double, on both sides of the fence — same guarantee as Python's repr().
function fmt(x: number): string {
  return String(x);
}

function embeddingLines(ids: string[], rows: Vec[]): string {
  let text = "";
  for (let i = 0; i < rows.length; i++) {
    text += ids[i] + "\t" + Array.from(rows[i]!, fmt).join("\t") + "\n";
  }
  return text;
}

function parseEmbeddingTsv(text: string): number[][] {
  const rows: number[][] = [];
  for (const line of text.split("\n")) {
    if (!line) continue;
    rows.push(line.split("\t").slice(1).map(Number));
  }
  return rows;
}

function parseKv(stdout: string): Map<string, string> {
  const kv = new Map<string, string>();
  for (const line of stdout.split("\n")) {
    const sp = line.indexOf(" ");
    if (sp > 0) kv.set(line.slice(0, sp), line.slice(sp + 1));
  }
  return kv;
}

/**
 * An immutable handle to a trained model. The mirrored fields (w, b, dim,
 * mu) always equal the core's values exactly: they are parsed from the
 * full-precision model document, and `text` is that document itself, so
 * save/load round trips are byte-identical.
 */
export class BoundModel {
  readonly w: number;
  readonly b: number;
  readonly dim: number;
  readonly mu: readonly number[];
  readonly text: string;

  constructor(text: string) {
    let w: number | undefined;
    let b: number | undefined;
    let dim: number | undefined;
    let mu: number[] | undefined;
    for (const line of text.split("\n")) {
      const sp = line.indexOf(" ");
      if (sp <= 0) continue;
      const key = line.slice(0, sp);
      const value = line.slice(sp + 1);
      if (key === "w") w = Number(value);
      else if (key === "b") b = Number(value);
      else if (key === "dim") dim = Number(value);
      else if (key === "mu") mu = value.trim().split(/\s+/).map(Number);
    }
    if (w === undefined || b === undefined || dim === undefined || mu === undefined) {
      throw new Error("not a psda-1 model document (missing w/b/dim/mu)");
    }
    this.w = w;
    this.b = b;
    this.dim = dim;
    this.mu = mu;
    this.text = text;
  }
}

export function loadModel(path: string): BoundModel {
  return new BoundModel(readFileSync(path, "utf8"));
}

export function saveModel(model: BoundModel, path: string): void {
  writeFileSync(path, model.text);
}

export interface TrainOptions {
  /** Freeze b = 0 (uniform speaker prior). */
  bZero?: boolean;
  maxIters?: number;
  relTol?: number;
}

/**
 * Estimate a model from labeled embeddings — identical to running
 * `psda train` on the same data (same defaults, same determinism).
 *
 * `embeddings` is one unit vector per row; `speakers[i]` labels row i.
 */
export function train(embeddings: Vec[], speakers: string[], options: TrainOptions = {}): BoundModel {
  if (embeddings.length !== speakers.length) {
    throw new Error(`${embeddings.length} embeddings but ${speakers.length} speaker labels`);
  }
  return inTempDir((dir) => {
    const ids = embeddings.map((_, i) => `seg${i}`);
    writeFileSync(join(dir, "emb.tsv"), embeddingLines(ids, embeddings));
    writeFileSync(join(dir, "labels.tsv"), ids.map((id, i) => `${id}\t${speakers[i]}\n`).join(""));
    const args = ["train", join(dir, "emb.tsv"), join(dir, "labels.tsv"), "-o", join(dir, "model.txt")];
    if (options.bZero) args.push("--b-zero");
    if (options.maxIters !== undefined) args.push("--max-iters", String(options.maxIters));
    if (options.relTol !== undefined) args.push("--rel-tol", String(options.relTol));
    cli(args);
    return loadModel(join(dir, "model.txt"));
  });
}

/**
 * Score every enrollment side against every test embedding; returns the
 * llr matrix, elementwise equal to the core's blocked scoring.
 *
 * Each enrollment side is a list of that speaker's unit embeddings
 * (multi-segment enrollment pools them); each test side is one embedding.
 */
export function scoreMatrix(model: BoundModel, enrolls: Vec[][], tests: Vec[]): number[][] {
  if (enrolls.length === 0 || tests.length === 0) {
    return enrolls.map(() => []);
  }
  return inTempDir((dir) => {
    const ids: string[] = [];
    const rows: Vec[] = [];
    const mapLines: string[] = [];
    enrolls.forEach((side, i) => {
      if (side.length === 0) throw new Error(`enrollment side ${i} has no segments`);
      const segIds = Array.from(side, (v, k) => {
        ids.push(`e${i}_${k}`);
        rows.push(v);
        return `e${i}_${k}`;
      });
      mapLines.push(`E${i} ${segIds.join(" ")}\n`);
    });
    tests.forEach((v, j) => {
      ids.push(`t${j}`);
      rows.push(v);
    });
    let trialLines = "";
    for (let i = 0; i < enrolls.length; i++) {
      for (let j = 0; j < tests.length; j++) trialLines += `E${i} t${j}\n`;
    }
    writeFileSync(join(dir, "emb.tsv"), embeddingLines(ids, rows));
    writeFileSync(join(dir, "map.txt"), mapLines.join(""));
    writeFileSync(join(dir, "trials.txt"), trialLines);
    writeFileSync(join(dir, "model.txt"), model.text);
    cli([
      "score", join(dir, "model.txt"), join(dir, "emb.tsv"),
      join(dir, "map.txt"), join(dir, "trials.txt"),
      "-o", join(dir, "scores.txt"), "--digits", "17",
    ]);
    const S: number[][] = enrolls.map(() => new Array<number>(tests.length).fill(NaN));
    for (const line of readFileSync(join(dir, "scores.txt"), "utf8").split("\n")) {
      if (!line) continue;
      const [e, t, s] = line.split(/\s+/);
      S[Number(e!.slice(1))]![Number(t!.slice(1))] = Number(s);
    }
    return S;
  });
}

/** Log likelihood-ratio for one trial: the 1x1 case of scoreMatrix. */
export function llr(model: BoundModel, enroll: Vec[], test: Vec): number {
  return scoreMatrix(model, [enroll], [test])[0]![0]!;
}

/** Cosine score of two unit vectors — their dot product. */
export function cosine(a: Vec, b: Vec): number {
  if (a.length !== b.length) {
    throw new Error(`dimension mismatch: ${a.length} vs ${b.length}`);
  }
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i]! * b[i]!;
  return s;
}

function evalScores(targets: Vec, nontargets: Vec, extraArgs: string[]): Map<string, string> {
  if (targets.length === 0 || nontargets.length === 0) {
    throw new Error("need at least one target and one nontarget score");
  }
  return inTempDir((dir) => {
    let lines = "";
    for (let i = 0; i < targets.length; i++) lines += `a b${i} ${fmt(targets[i]!)} tar\n`;
    for (let i = 0; i < nontargets.length; i++) lines += `a c${i} ${fmt(nontargets[i]!)} non\n`;
    writeFileSync(join(dir, "scores.txt"), lines);
    return parseKv(cli(["eval", join(dir, "scores.txt"), ...extraArgs]));
  });
}

/** Equal error rate as a fraction in [0, 0.5] (the CLI reports percent). */
export function eer(targets: Vec, nontargets: Vec): number {
  return Number(evalScores(targets, nontargets, []).get("eer_percent")) / 100;
}

/** Normalized minimum detection cost at the given target prior. */
export function minDcf(targets: Vec, nontargets: Vec, pTar = 0.05): number {
  return Number(evalScores(targets, nontargets, ["--p-tar", String(pTar)]).get("min_dcf"));
}

/** Draw n unit vectors from VMF(mu, kappa); deterministic per seed. */
export function sampleVmf(mu: Vec, kappa: number, n: number, seed: number): number[][] {
  return inTempDir((dir) => {
    writeFileSync(join(dir, "mu.txt"), Array.from(mu, fmt).join(" ") + "\n");
    cli([
      "sample", "--mu-file", join(dir, "mu.txt"), "--kappa", String(kappa),
      "-n", String(n), "--seed", String(seed),
      "-o", join(dir, "draws.tsv"), "--format", "tsv",
    ]);
    return parseEmbeddingTsv(readFileSync(join(dir, "draws.tsv"), "utf8"));
  });
}
