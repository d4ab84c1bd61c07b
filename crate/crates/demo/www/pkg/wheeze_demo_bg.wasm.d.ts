/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_eventview_free: (a: number, b: number) => void;
export const __wbg_get_probeview_accuracy: (a: number) => number;
export const __wbg_get_probeview_fn_: (a: number) => number;
export const __wbg_get_probeview_fp: (a: number) => number;
export const __wbg_get_probeview_mcc: (a: number) => number;
export const __wbg_get_probeview_tn: (a: number) => number;
export const __wbg_get_probeview_tp: (a: number) => number;
export const __wbg_probeview_free: (a: number, b: number) => void;
export const __wbg_set_probeview_accuracy: (a: number, b: number) => void;
export const __wbg_set_probeview_fn_: (a: number, b: number) => void;
export const __wbg_set_probeview_fp: (a: number, b: number) => void;
export const __wbg_set_probeview_mcc: (a: number, b: number) => void;
export const __wbg_set_probeview_tn: (a: number, b: number) => void;
export const __wbg_set_probeview_tp: (a: number, b: number) => void;
export const burr_density: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const burr_histogram: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
export const event_spectrogram: (a: bigint, b: number, c: number) => [number, number, number];
export const eventview_cols: (a: number) => number;
export const eventview_duration: (a: number) => number;
export const eventview_padding_fraction: (a: number) => number;
export const eventview_rows: (a: number) => number;
export const eventview_start: (a: number) => number;
export const eventview_values: (a: number) => [number, number];
export const padding_probe_view: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
