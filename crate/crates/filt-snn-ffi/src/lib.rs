//! C interface for the spiking-network engine: opaque network handles,
//! status codes, and a thread-local last-error message.
//!
//! Every function is panic-safe: a caught panic returns
//! `FILT_SNN_STATUS_INTERNAL_ERROR` instead of unwinding across the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use filt_snn::encoder::{encode_pixel, EncodedSample, EncoderParams};
use filt_snn::network::{init_weights, InitScheme, Network, Topology};
use filt_snn::neuron::{KernelParams, SimWindow};
use filt_snn::Error;

/// Result code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FiltSnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IoError = 3,
    FormatError = 4,
    InternalError = 5,
}

/// Opaque handle to a trained or freshly initialized network.
pub struct FiltSnnNetwork {
    inner: Network,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: FiltSnnStatus, msg: &str) -> FiltSnnStatus {
    set_error(msg);
    status
}

fn fail_null(what: &str) -> FiltSnnStatus {
    fail(FiltSnnStatus::NullPointer, &format!("{what} is null"))
}

fn from_engine_error(e: &Error) -> FiltSnnStatus {
    match e {
        Error::Io(_) => FiltSnnStatus::IoError,
        Error::Data(_) => FiltSnnStatus::FormatError,
        Error::Config(_) => FiltSnnStatus::InvalidArgument,
    }
}

fn guarded(f: impl FnOnce() -> FiltSnnStatus) -> FiltSnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(FiltSnnStatus::InternalError, "internal panic"),
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn filt_snn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn filt_snn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a network with the given layer sizes (inputs first) and randomly
/// initialized weights derived from `seed`.
///
/// # Safety
/// `layer_sizes` must point to `n_layers` readable u32 values and
/// `out_network` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_network_create(
    layer_sizes: *const u32,
    n_layers: usize,
    seed: u64,
    out_network: *mut *mut FiltSnnNetwork,
) -> FiltSnnStatus {
    guarded(|| {
        if out_network.is_null() {
            return fail_null("out_network");
        }
        if layer_sizes.is_null() {
            return fail_null("layer_sizes");
        }
        let sizes: Vec<usize> = unsafe { std::slice::from_raw_parts(layer_sizes, n_layers) }
            .iter()
            .map(|&s| s as usize)
            .collect();
        let topology = match Topology::new(sizes) {
            Ok(t) => t,
            Err(e) => return fail(from_engine_error(&e), &e.to_string()),
        };
        let net = init_weights(&topology, seed, InitScheme::UniformDrive, &KernelParams::default());
        unsafe { *out_network = Box::into_raw(Box::new(FiltSnnNetwork { inner: net })) };
        FiltSnnStatus::Ok
    })
}

/// Load a network from a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_network` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_network_load(
    path: *const c_char,
    out_network: *mut *mut FiltSnnNetwork,
) -> FiltSnnStatus {
    guarded(|| {
        if out_network.is_null() {
            return fail_null("out_network");
        }
        if path.is_null() {
            return fail_null("path");
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p,
            Err(_) => return fail(FiltSnnStatus::InvalidArgument, "path is not valid UTF-8"),
        };
        match Network::load_checkpoint(Path::new(path)) {
            Ok(net) => {
                unsafe { *out_network = Box::into_raw(Box::new(FiltSnnNetwork { inner: net })) };
                FiltSnnStatus::Ok
            }
            Err(e) => fail(from_engine_error(&e), &e.to_string()),
        }
    })
}

/// Save a network to a checkpoint file.
///
/// # Safety
/// `network` must come from this library and `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_network_save(
    network: *const FiltSnnNetwork,
    path: *const c_char,
) -> FiltSnnStatus {
    guarded(|| {
        let Some(net) = (unsafe { network.as_ref() }) else {
            return fail_null("network");
        };
        if path.is_null() {
            return fail_null("path");
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p,
            Err(_) => return fail(FiltSnnStatus::InvalidArgument, "path is not valid UTF-8"),
        };
        match net.inner.save_checkpoint(Path::new(path)) {
            Ok(()) => FiltSnnStatus::Ok,
            Err(e) => fail(from_engine_error(&e), &e.to_string()),
        }
    })
}

/// Number of input channels, or 0 when `network` is null.
///
/// # Safety
/// `network` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_network_n_inputs(network: *const FiltSnnNetwork) -> u32 {
    match unsafe { network.as_ref() } {
        Some(net) => net.inner.topology().n_inputs() as u32,
        None => 0,
    }
}

/// Number of output classes, or 0 when `network` is null.
///
/// # Safety
/// `network` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_network_n_outputs(network: *const FiltSnnNetwork) -> u32 {
    match unsafe { network.as_ref() } {
        Some(net) => net.inner.topology().n_outputs() as u32,
        None => 0,
    }
}

/// Classify one image given as bytes in [0, 255], one per input channel.
/// Writes the winning class index to `out_class`, or -1 when no output
/// neuron spikes. Uses the default encoder and a 10 ms window.
///
/// # Safety
/// `pixels` must point to `n_pixels` readable bytes; `network` and
/// `out_class` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_network_classify(
    network: *const FiltSnnNetwork,
    pixels: *const u8,
    n_pixels: usize,
    out_class: *mut i32,
) -> FiltSnnStatus {
    guarded(|| {
        let Some(net) = (unsafe { network.as_ref() }) else {
            return fail_null("network");
        };
        if pixels.is_null() {
            return fail_null("pixels");
        }
        if out_class.is_null() {
            return fail_null("out_class");
        }
        let expected = net.inner.topology().n_inputs();
        if n_pixels != expected {
            return fail(
                FiltSnnStatus::InvalidArgument,
                &format!("network expects {expected} pixels, got {n_pixels}"),
            );
        }
        let bytes = unsafe { std::slice::from_raw_parts(pixels, n_pixels) };
        let params = EncoderParams::default();
        let mut spike_times = Vec::with_capacity(n_pixels);
        for &b in bytes {
            match encode_pixel(b as f64 / 255.0, &params) {
                Ok(t) => spike_times.push(t),
                Err(e) => return fail(from_engine_error(&e), &e.to_string()),
            }
        }
        let sample = EncodedSample { spike_times, label: 0 };
        let window = SimWindow::new(10.0, 0.1).expect("default window is valid");
        match net.inner.forward(&sample, &window, None) {
            Ok(fwd) => {
                let class = fwd.decision.map(|c| c as i32).unwrap_or(-1);
                unsafe { *out_class = class };
                FiltSnnStatus::Ok
            }
            Err(e) => fail(from_engine_error(&e), &e.to_string()),
        }
    })
}

/// Release a network handle. Null is a no-op.
///
/// # Safety
/// `network` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_network_free(network: *mut FiltSnnNetwork) {
    if !network.is_null() {
        drop(unsafe { Box::from_raw(network) });
    }
}

/// Encode one normalized pixel in [0, 1] as a spike latency. Writes 1 to
/// `out_spiked` and the latency to `out_time` when the pixel crosses the
/// threshold, 0 otherwise.
///
/// # Safety
/// `out_time` and `out_spiked` must be valid destination pointers.
#[no_mangle]
pub unsafe extern "C" fn filt_snn_encode_pixel(
    pixel: f64,
    t_max: f64,
    sigma: f64,
    p_t: f64,
    out_time: *mut f64,
    out_spiked: *mut i32,
) -> FiltSnnStatus {
    guarded(|| {
        if out_time.is_null() {
            return fail_null("out_time");
        }
        if out_spiked.is_null() {
            return fail_null("out_spiked");
        }
        if !(0.0..=1.0).contains(&pixel) {
            return fail(
                FiltSnnStatus::InvalidArgument,
                &format!("pixel must lie in [0, 1], got {pixel}"),
            );
        }
        let params = EncoderParams { t_max, sigma, p_t };
        if let Err(e) = params.validate() {
            return fail(FiltSnnStatus::InvalidArgument, &e.to_string());
        }
        match encode_pixel(pixel, &params) {
            Ok(Some(t)) => {
                unsafe {
                    *out_time = t;
                    *out_spiked = 1;
                }
                FiltSnnStatus::Ok
            }
            Ok(None) => {
                unsafe {
                    *out_time = 0.0;
                    *out_spiked = 0;
                }
                FiltSnnStatus::Ok
            }
            Err(e) => fail(from_engine_error(&e), &e.to_string()),
        }
    })
}
