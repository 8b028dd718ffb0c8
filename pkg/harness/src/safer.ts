/**
 * Bridge to the primary `safer` CLI. The harness touches the primary only
 * through this subprocess boundary and the shared container files.
 */

import { spawnSync } from "node:child_process";

export interface SaferResult {
  code: number;
  stdout: string;
  stderr: string;
}

let resolved: string[] | null = null;

function saferCommand(): string[] {
  if (resolved) return resolved;
  if (process.env.SAFER_BIN) {
    resolved = process.env.SAFER_BIN.split(" ");
    return resolved;
  }
  const probe = spawnSync("safer", ["--version"], { encoding: "utf-8" });
  resolved = probe.status === 0 ? ["safer"] : ["python3", "-m", "safer"];
  return resolved;
}

export function runSafer(args: string[], opts: { allowFailure?: boolean; cwd?: string } = {}): SaferResult {
  const [cmd, ...prefix] = saferCommand();
  const proc = spawnSync(cmd, [...prefix, ...args], { encoding: "utf-8", cwd: opts.cwd });
  if (proc.error) throw proc.error;
  const result = { code: proc.status ?? -1, stdout: proc.stdout, stderr: proc.stderr };
  if (!opts.allowFailure && result.code !== 0) {
    throw new Error(`safer ${args.join(" ")} exited ${result.code}\n${result.stderr}`);
  }
  return result;
}

/** Parse the score line of `safer style-sim`. */
export function parseStyleSim(stdout: string): number {
  const match = /style_similarity:\s*(-?\d+(?:\.\d+)?)/.exec(stdout);
  if (!match) throw new Error(`no style_similarity line in: ${stdout}`);
  return Number(match[1]);
}
