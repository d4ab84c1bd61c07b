/* tslint:disable */
/* eslint-disable */

/**
 * Normalized 257 x 59 magnitude spectrogram of one zero-padded event.
 */
export class EventView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly cols: number;
    readonly duration: number;
    readonly padding_fraction: number;
    readonly rows: number;
    readonly start: number;
    /**
     * Row-major, one row per frequency bin from 0 Hz upwards.
     */
    readonly values: Float64Array;
}

export class ProbeView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    accuracy: number;
    fn_: number;
    fp: number;
    mcc: number;
    tn: number;
    tp: number;
}

export function burr_density(alpha: number, c: number, k: number, lo: number, hi: number, points: number): Float64Array;

export function burr_histogram(alpha: number, c: number, k: number, lo: number, hi: number, n: number, bins: number, seed: bigint): Float64Array;

export function event_spectrogram(seed: bigint, snr_db: number, duration_s: number): EventView;

export function padding_probe_view(fixed: boolean, fd_duration: number, n_events: number, seed: bigint): ProbeView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_eventview_free: (a: number, b: number) => void;
    readonly __wbg_get_probeview_accuracy: (a: number) => number;
    readonly __wbg_get_probeview_fn_: (a: number) => number;
    readonly __wbg_get_probeview_fp: (a: number) => number;
    readonly __wbg_get_probeview_mcc: (a: number) => number;
    readonly __wbg_get_probeview_tn: (a: number) => number;
    readonly __wbg_get_probeview_tp: (a: number) => number;
    readonly __wbg_probeview_free: (a: number, b: number) => void;
    readonly __wbg_set_probeview_accuracy: (a: number, b: number) => void;
    readonly __wbg_set_probeview_fn_: (a: number, b: number) => void;
    readonly __wbg_set_probeview_fp: (a: number, b: number) => void;
    readonly __wbg_set_probeview_mcc: (a: number, b: number) => void;
    readonly __wbg_set_probeview_tn: (a: number, b: number) => void;
    readonly __wbg_set_probeview_tp: (a: number, b: number) => void;
    readonly burr_density: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly burr_histogram: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly event_spectrogram: (a: bigint, b: number, c: number) => [number, number, number];
    readonly eventview_cols: (a: number) => number;
    readonly eventview_duration: (a: number) => number;
    readonly eventview_padding_fraction: (a: number) => number;
    readonly eventview_rows: (a: number) => number;
    readonly eventview_start: (a: number) => number;
    readonly eventview_values: (a: number) => [number, number];
    readonly padding_probe_view: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
