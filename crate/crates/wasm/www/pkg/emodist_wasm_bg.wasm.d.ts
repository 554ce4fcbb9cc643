/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const applyTemperature: (a: number, b: number, c: number) => [number, number, number, number];
export const bestTemperature: (a: number, b: number, c: number, d: number) => [number, number, number];
export const divergences: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const evalIsotonic: (a: number, b: number, c: number) => [number, number, number];
export const fitIsotonic: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const temperatureCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
