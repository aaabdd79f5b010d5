/* @ts-self-types="./flexdock_wasm_demo.d.ts" */

/**
 * Rotation-angle density of IGSO(3) at `eps` on `n` points of `[0, pi]`,
 * with a histogram of `samples` inverse-CDF draws on `bins` bins.
 */
export class AngleCurve {
    static __wrap(ptr) {
        const obj = Object.create(AngleCurve.prototype);
        obj.__wbg_ptr = ptr;
        AngleCurveFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        AngleCurveFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_anglecurve_free(ptr, 0);
    }
    /**
     * @returns {Float64Array}
     */
    density() {
        const ret = wasm.anglecurve_density(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * Normalized so the bars integrate to one.
     * @returns {Float64Array}
     */
    histogram() {
        const ret = wasm.anglecurve_histogram(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {Float64Array}
     */
    omega() {
        const ret = wasm.anglecurve_omega(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * Angle density of a uniformly random rotation.
     * @returns {Float64Array}
     */
    uniform() {
        const ret = wasm.anglecurve_uniform(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
}
if (Symbol.dispose) AngleCurve.prototype[Symbol.dispose] = AngleCurve.prototype.free;

/**
 * One oracle-guided reverse trajectory on a synthetic pair.
 */
export class DockRun {
    static __wrap(ptr) {
        const obj = Object.create(DockRun.prototype);
        obj.__wbg_ptr = ptr;
        DockRunFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        DockRunFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_dockrun_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    beta() {
        const ret = wasm.dockrun_beta(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    final_irmsd() {
        const ret = wasm.dockrun_final_irmsd(this.__wbg_ptr);
        return ret;
    }
    /**
     * Calpha coordinates of frame `k`, receptor first, as `x y z` triples.
     * @param {number} k
     * @returns {Float64Array}
     */
    frame(k) {
        const ret = wasm.dockrun_frame(this.__wbg_ptr, k);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    frame_count() {
        const ret = wasm.dockrun_frame_count(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Interface RMSD to the bound complex after each step.
     * @returns {Float64Array}
     */
    irmsd_trace() {
        const ret = wasm.dockrun_irmsd_trace(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    n_receptor() {
        const ret = wasm.dockrun_n_receptor(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Interface RMSD of the superposed unbound chains.
     * @returns {number}
     */
    unbound_irmsd() {
        const ret = wasm.dockrun_unbound_irmsd(this.__wbg_ptr);
        return ret;
    }
}
if (Symbol.dispose) DockRun.prototype[Symbol.dispose] = DockRun.prototype.free;

/**
 * @param {number} irmsd_value
 * @returns {number}
 */
export function beta_for_irmsd(irmsd_value) {
    const ret = wasm.beta_for_irmsd(irmsd_value);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return ret[0];
}

/**
 * @param {number} eps
 * @param {number} n
 * @param {number} samples
 * @param {number} bins
 * @param {bigint} seed
 * @returns {AngleCurve}
 */
export function igso3_angles(eps, n, samples, bins, seed) {
    const ret = wasm.igso3_angles(eps, n, samples, bins, seed);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return AngleCurve.__wrap(ret[0]);
}

/**
 * @param {number} n_receptor
 * @param {number} n_ligand
 * @param {number} flexibility
 * @param {bigint} seed
 * @param {number} steps
 * @param {boolean} deterministic
 * @returns {DockRun}
 */
export function oracle_dock(n_receptor, n_ligand, flexibility, seed, steps, deterministic) {
    const ret = wasm.oracle_dock(n_receptor, n_ligand, flexibility, seed, steps, deterministic);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return DockRun.__wrap(ret[0]);
}

/**
 * Rows of `[t, sigma_tr, sigma_rot, alpha(t)]` flattened, for `n` evenly
 * spaced times in `[0, 1]`. `beta` is derived from `irmsd` when `beta <= 0`.
 * @param {number} irmsd_value
 * @param {number} beta
 * @param {number} n
 * @returns {Float64Array}
 */
export function schedule_curves(irmsd_value, beta, n) {
    const ret = wasm.schedule_curves(irmsd_value, beta, n);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v1;
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_generic_0000000000000001: function(arg0, arg1) {
            // Cast intrinsic for `Ref(String) -> Externref`.
            const ret = getStringFromWasm0(arg0, arg1);
            return ret;
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./flexdock_wasm_demo_bg.js": import0,
    };
}

const AngleCurveFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_anglecurve_free(ptr, 1));
const DockRunFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_dockrun_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('flexdock_wasm_demo_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
