/* tslint:disable */
/* eslint-disable */

export function applyTemperature(model: Float64Array, t: number): Float64Array;

export function bestTemperature(human: Float64Array, model: Float64Array): number;

/**
 * `[jsd, kld, wasserstein, human entropy, model entropy]`.
 */
export function divergences(human: Float64Array, model: Float64Array): Float64Array;

export function evalIsotonic(knots: Float64Array, x: number): number;

/**
 * Knots as `[x0, y0, x1, y1, ...]`; empty when fewer than two distinct x.
 */
export function fitIsotonic(xs: Float64Array, ys: Float64Array): Float64Array;

/**
 * JSD to `human` after scaling `model` by each temperature in `temps`.
 */
export function temperatureCurve(human: Float64Array, model: Float64Array, temps: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly applyTemperature: (a: number, b: number, c: number) => [number, number, number, number];
    readonly bestTemperature: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly divergences: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly evalIsotonic: (a: number, b: number, c: number) => [number, number, number];
    readonly fitIsotonic: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly temperatureCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
