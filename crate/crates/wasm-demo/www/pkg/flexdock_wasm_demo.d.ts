/* tslint:disable */
/* eslint-disable */

/**
 * Rotation-angle density of IGSO(3) at `eps` on `n` points of `[0, pi]`,
 * with a histogram of `samples` inverse-CDF draws on `bins` bins.
 */
export class AngleCurve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    density(): Float64Array;
    /**
     * Normalized so the bars integrate to one.
     */
    histogram(): Float64Array;
    omega(): Float64Array;
    /**
     * Angle density of a uniformly random rotation.
     */
    uniform(): Float64Array;
}

/**
 * One oracle-guided reverse trajectory on a synthetic pair.
 */
export class DockRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    beta(): number;
    final_irmsd(): number;
    /**
     * Calpha coordinates of frame `k`, receptor first, as `x y z` triples.
     */
    frame(k: number): Float64Array;
    frame_count(): number;
    /**
     * Interface RMSD to the bound complex after each step.
     */
    irmsd_trace(): Float64Array;
    n_receptor(): number;
    /**
     * Interface RMSD of the superposed unbound chains.
     */
    unbound_irmsd(): number;
}

export function beta_for_irmsd(irmsd_value: number): number;

export function igso3_angles(eps: number, n: number, samples: number, bins: number, seed: bigint): AngleCurve;

export function oracle_dock(n_receptor: number, n_ligand: number, flexibility: number, seed: bigint, steps: number, deterministic: boolean): DockRun;

/**
 * Rows of `[t, sigma_tr, sigma_rot, alpha(t)]` flattened, for `n` evenly
 * spaced times in `[0, 1]`. `beta` is derived from `irmsd` when `beta <= 0`.
 */
export function schedule_curves(irmsd_value: number, beta: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_anglecurve_free: (a: number, b: number) => void;
    readonly __wbg_dockrun_free: (a: number, b: number) => void;
    readonly anglecurve_density: (a: number) => [number, number];
    readonly anglecurve_histogram: (a: number) => [number, number];
    readonly anglecurve_omega: (a: number) => [number, number];
    readonly anglecurve_uniform: (a: number) => [number, number];
    readonly beta_for_irmsd: (a: number) => [number, number, number];
    readonly dockrun_beta: (a: number) => number;
    readonly dockrun_final_irmsd: (a: number) => number;
    readonly dockrun_frame: (a: number, b: number) => [number, number];
    readonly dockrun_frame_count: (a: number) => number;
    readonly dockrun_irmsd_trace: (a: number) => [number, number];
    readonly dockrun_n_receptor: (a: number) => number;
    readonly dockrun_unbound_irmsd: (a: number) => number;
    readonly igso3_angles: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly oracle_dock: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
    readonly schedule_curves: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
