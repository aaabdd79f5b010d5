/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_anglecurve_free: (a: number, b: number) => void;
export const __wbg_dockrun_free: (a: number, b: number) => void;
export const anglecurve_density: (a: number) => [number, number];
export const anglecurve_histogram: (a: number) => [number, number];
export const anglecurve_omega: (a: number) => [number, number];
export const anglecurve_uniform: (a: number) => [number, number];
export const beta_for_irmsd: (a: number) => [number, number, number];
export const dockrun_beta: (a: number) => number;
export const dockrun_final_irmsd: (a: number) => number;
export const dockrun_frame: (a: number, b: number) => [number, number];
export const dockrun_frame_count: (a: number) => number;
export const dockrun_irmsd_trace: (a: number) => [number, number];
export const dockrun_n_receptor: (a: number) => number;
export const dockrun_unbound_irmsd: (a: number) => number;
export const igso3_angles: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const oracle_dock: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
export const schedule_curves: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
