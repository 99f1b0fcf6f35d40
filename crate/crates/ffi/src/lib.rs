//! C interface to gatres-core.
//!
//! Every entry point returns a [`GatresStatus`]. On failure a description is
//! kept per thread and can be read with [`gatres_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Node arrays follow the canonical order: junctions, reservoirs, tanks.

use gatres_core::generator::Normalization;
use gatres_core::gnn::{gatres_forward, observed_sample, read_checkpoint, Checkpoint, GnnError, ModelGraph};
use gatres_core::graph::{to_graph, GraphTopology};
use gatres_core::hydraulics::{ControlSettings, HydraulicState, SolverConfig, SolverError, solve_steady_state};
use gatres_core::inp::parse_inp;
use gatres_core::network::NetworkModel;
use libc::{c_char, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatresStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidModel = 5,
    /// A state was produced but the solver did not converge.
    NotConverged = 6,
    Solver = 7,
    Checkpoint = 8,
    /// The checkpoint holds no scaling for this network.
    UnknownNetwork = 9,
    LengthMismatch = 10,
    Model = 11,
    Panic = 12,
    /// No node with the requested id.
    UnknownNode = 13,
}

/// A parsed and validated network.
pub struct GatresNetwork {
    model: NetworkModel,
    topology: GraphTopology,
    graph: ModelGraph,
}

/// Result of one steady-state solve.
pub struct GatresState {
    state: HydraulicState,
}

/// A trained estimator loaded from a checkpoint.
pub struct GatresModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn fail(status: GatresStatus, message: impl AsRef<str>) -> GatresStatus {
    set_error(message.as_ref());
    status
}

fn guard(f: impl FnOnce() -> GatresStatus) -> GatresStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(GatresStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(ptr: *const c_char) -> Result<&'a str, GatresStatus> {
    if ptr.is_null() {
        return Err(fail(GatresStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(GatresStatus::InvalidUtf8, "argument is not UTF-8"))
}

/// Message describing the last failure on this thread; empty when none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gatres_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn build_network(source: &str) -> Result<GatresNetwork, GatresStatus> {
    let model = parse_inp(source).map_err(|e| fail(GatresStatus::Parse, e.to_string()))?;
    let topology = to_graph(&model).map_err(|e| fail(GatresStatus::InvalidModel, e.to_string()))?;
    let graph = ModelGraph::new(&topology);
    Ok(GatresNetwork {
        model,
        topology,
        graph,
    })
}

/// Callers check `out` for null first.
unsafe fn emit<T>(value: Result<T, GatresStatus>, out: *mut *mut T) -> GatresStatus {
    match value {
        Ok(v) => {
            *out = Box::into_raw(Box::new(v));
            GatresStatus::Ok
        }
        Err(status) => status,
    }
}

/// Parse INP text into a new network handle.
///
/// # Safety
/// `inp_text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gatres_network_from_inp_str(
    inp_text: *const c_char,
    out: *mut *mut GatresNetwork,
) -> GatresStatus {
    guard(|| {
        if out.is_null() {
            return fail(GatresStatus::NullPointer, "null output pointer");
        }
        let source = match text(inp_text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        emit(build_network(source), out)
    })
}

/// Read and parse an INP file into a new network handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gatres_network_from_inp_file(
    path: *const c_char,
    out: *mut *mut GatresNetwork,
) -> GatresStatus {
    guard(|| {
        if out.is_null() {
            return fail(GatresStatus::NullPointer, "null output pointer");
        }
        let path = match text(path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let source = match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) => return fail(GatresStatus::Io, format!("{path}: {e}")),
        };
        emit(build_network(&source), out)
    })
}

/// # Safety
/// `network` must come from a `gatres_network_from_*` call or be null.
#[no_mangle]
pub unsafe extern "C" fn gatres_network_free(network: *mut GatresNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// # Safety
/// `network` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatres_network_node_count(network: *const GatresNetwork) -> size_t {
    network.as_ref().map_or(0, |n| n.topology.node_count())
}

/// # Safety
/// `network` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatres_network_junction_count(network: *const GatresNetwork) -> size_t {
    network.as_ref().map_or(0, |n| n.topology.junction_count())
}

/// # Safety
/// `network` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatres_network_link_count(network: *const GatresNetwork) -> size_t {
    network.as_ref().map_or(0, |n| n.model.link_count())
}

/// Position of node `id` in node arrays.
///
/// # Safety
/// Pointers must be valid; `id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gatres_network_node_index(
    network: *const GatresNetwork,
    id: *const c_char,
    out_index: *mut size_t,
) -> GatresStatus {
    guard(|| {
        let (Some(net), false) = (network.as_ref(), out_index.is_null()) else {
            return fail(GatresStatus::NullPointer, "null argument");
        };
        let id = match text(id) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match net.topology.node_ids.iter().position(|n| n == id) {
            Some(i) => {
                *out_index = i;
                GatresStatus::Ok
            }
            None => fail(GatresStatus::UnknownNode, format!("no node {id:?}")),
        }
    })
}

/// Solve the network's own operating point with every demand scaled by
/// `demand_scale`. A non-converged state is still returned through `out`
/// together with `NotConverged`.
///
/// # Safety
/// `network` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gatres_simulate(
    network: *const GatresNetwork,
    demand_scale: f64,
    out: *mut *mut GatresState,
) -> GatresStatus {
    guard(|| {
        let (Some(net), false) = (network.as_ref(), out.is_null()) else {
            return fail(GatresStatus::NullPointer, "null argument");
        };
        let mut controls = ControlSettings::base(&net.model);
        controls.demands.iter_mut().for_each(|d| *d *= demand_scale);
        match solve_steady_state(&net.model, &controls, &SolverConfig::default()) {
            Ok(state) => emit(Ok(GatresState { state }), out),
            Err(SolverError::NotConverged(state)) => {
                emit(Ok(GatresState { state: *state }), out);
                fail(GatresStatus::NotConverged, "solver hit its iteration limit")
            }
            Err(SolverError::InvalidModel(r)) => fail(
                GatresStatus::InvalidModel,
                format!("network has {} validation issue(s)", r.issues.len()),
            ),
            Err(e) => fail(GatresStatus::Solver, e.to_string()),
        }
    })
}

/// # Safety
/// `state` must come from [`gatres_simulate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gatres_state_free(state: *mut GatresState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `state` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatres_state_converged(state: *const GatresState) -> bool {
    state.as_ref().is_some_and(|s| s.state.converged)
}

/// # Safety
/// `state` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gatres_state_iterations(state: *const GatresState) -> size_t {
    state.as_ref().map_or(0, |s| s.state.iterations)
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: size_t) -> GatresStatus {
    if out.is_null() {
        return fail(GatresStatus::NullPointer, "null output buffer");
    }
    if len != values.len() {
        return fail(
            GatresStatus::LengthMismatch,
            format!("buffer holds {len} values, {} needed", values.len()),
        );
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, len);
    GatresStatus::Ok
}

/// Copy nodal pressures (mH₂O) into `out`, which must hold exactly one value
/// per node.
///
/// # Safety
/// `state` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn gatres_state_pressures(
    state: *const GatresState,
    out: *mut f64,
    len: size_t,
) -> GatresStatus {
    match state.as_ref() {
        Some(s) => copy_out(&s.state.pressures, out, len),
        None => fail(GatresStatus::NullPointer, "null state"),
    }
}

/// Copy nodal heads (m).
///
/// # Safety
/// `state` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn gatres_state_heads(
    state: *const GatresState,
    out: *mut f64,
    len: size_t,
) -> GatresStatus {
    match state.as_ref() {
        Some(s) => copy_out(&s.state.heads, out, len),
        None => fail(GatresStatus::NullPointer, "null state"),
    }
}

/// Copy link flows (m³/s), one per link.
///
/// # Safety
/// `state` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn gatres_state_flows(
    state: *const GatresState,
    out: *mut f64,
    len: size_t,
) -> GatresStatus {
    match state.as_ref() {
        Some(s) => copy_out(&s.state.flows, out, len),
        None => fail(GatresStatus::NullPointer, "null state"),
    }
}

/// Load a checkpoint written by the `gatres` tool.
///
/// # Safety
/// `path` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gatres_model_load(path: *const c_char, out: *mut *mut GatresModel) -> GatresStatus {
    guard(|| {
        if out.is_null() {
            return fail(GatresStatus::NullPointer, "null output pointer");
        }
        let path = match text(path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let loaded = read_checkpoint(std::path::Path::new(path)).map_err(|e| match e {
            GnnError::Io(e) => fail(GatresStatus::Io, format!("{path}: {e}")),
            other => fail(GatresStatus::Checkpoint, other.to_string()),
        });
        emit(loaded.map(|checkpoint| GatresModel { checkpoint }), out)
    })
}

/// # Safety
/// `model` must come from [`gatres_model_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gatres_model_free(model: *mut GatresModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn scaling<'a>(ckpt: &'a Checkpoint, net: &GatresNetwork, key: Option<&str>) -> Option<&'a Normalization> {
    let title = net.model.title.first().map(|t| t.trim()).unwrap_or("");
    match key {
        Some(k) => ckpt.normalization.get(k),
        None => ckpt
            .normalization
            .get(title)
            .or_else(|| {
                let mut all = ckpt.normalization.values();
                match (all.next(), all.next()) {
                    (Some(only), None) => Some(only),
                    _ => None,
                }
            }),
    }
}

/// Estimate every nodal pressure from sparse readings.
///
/// `observed` holds one value per node in mH₂O; NaN marks a node without a
/// sensor. `out` receives the estimate for every node. `network_key` picks
/// the scaling stored in the checkpoint; pass null to use the network title,
/// or the only stored scaling.
///
/// # Safety
/// Handles must be live, `observed` and `out` valid for `len` values and
/// `network_key` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gatres_model_estimate(
    model: *const GatresModel,
    network: *const GatresNetwork,
    network_key: *const c_char,
    observed: *const f64,
    out: *mut f64,
    len: size_t,
) -> GatresStatus {
    guard(|| {
        let (Some(model), Some(net)) = (model.as_ref(), network.as_ref()) else {
            return fail(GatresStatus::NullPointer, "null handle");
        };
        if observed.is_null() {
            return fail(GatresStatus::NullPointer, "null readings");
        }
        let n = net.topology.node_count();
        if len != n {
            return fail(GatresStatus::LengthMismatch, format!("{len} values for {n} nodes"));
        }
        let key = if network_key.is_null() {
            None
        } else {
            match text(network_key) {
                Ok(k) => Some(k),
                Err(status) => return status,
            }
        };
        let ckpt = &model.checkpoint;
        let Some(norm) = scaling(ckpt, net, key) else {
            return fail(GatresStatus::UnknownNetwork, "checkpoint has no scaling for this network");
        };
        let readings = std::slice::from_raw_parts(observed, len);
        let mut demands = vec![0.0; n];
        let base = ControlSettings::base(&net.model);
        demands[..base.demands.len()].copy_from_slice(&base.demands);
        let estimate = observed_sample(readings, Some(&demands), &net.topology, norm, ckpt.config.demand_channel)
            .and_then(|s| gatres_forward(&s.features, &net.graph, &ckpt.weights, &ckpt.config));
        match estimate {
            Ok(fwd) => {
                let physical: Vec<f64> = fwd.output.iter().map(|v| norm.pressure_inverse(*v)).collect();
                copy_out(&physical, out, len)
            }
            Err(e) => fail(GatresStatus::Model, e.to_string()),
        }
    })
}
