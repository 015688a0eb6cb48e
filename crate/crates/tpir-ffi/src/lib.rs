//! C ABI over the tpir library: opaque handles, integer status codes, no
//! panics across the boundary. The header `include/tpir.h` is generated at
//! build time.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use tpir::field::{FieldMatrix, PrimeField};
use tpir::params::{capacity, derive_params, SchemeConfig, SchemeParams};
use tpir::scheme::{answer, build_schedule, decode, generate_queries, Database};
use tpir::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpirStatus {
    Ok = 0,
    /// a required pointer argument was null
    NullArgument = 1,
    /// the (N, T, M) configuration is invalid
    InvalidConfig = 2,
    /// the chosen field size is below the scheme's minimum
    FieldTooSmall = 3,
    /// any other failure (I/O, internal, panic)
    Runtime = 4,
}

fn status_of(err: &Error) -> TpirStatus {
    match err {
        Error::InvalidConfig(_) => TpirStatus::InvalidConfig,
        Error::FieldTooSmall { .. } => TpirStatus::FieldTooSmall,
        _ => TpirStatus::Runtime,
    }
}

/// Opaque handle for a derived parameter set.
pub struct TpirParams {
    inner: SchemeParams,
}

/// Derive scheme parameters for N servers, collusion threshold T and M
/// records. On success writes a handle to `out`; release it with
/// `tpir_params_free`.
///
/// # Safety
/// `out` must be a valid pointer to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn tpir_params_new(
    servers: u32,
    collusion: u32,
    records: u32,
    out: *mut *mut TpirParams,
) -> TpirStatus {
    if out.is_null() {
        return TpirStatus::NullArgument;
    }
    let result = catch_unwind(|| {
        let config = SchemeConfig::new(servers as usize, collusion as usize, records as usize)?;
        derive_params(config)
    });
    match result {
        Ok(Ok(inner)) => {
            *out = Box::into_raw(Box::new(TpirParams { inner }));
            TpirStatus::Ok
        }
        Ok(Err(e)) => status_of(&e),
        Err(_) => TpirStatus::Runtime,
    }
}

/// Release a handle returned by `tpir_params_new`. A null pointer is a no-op.
///
/// # Safety
/// `params` must be null or a pointer obtained from `tpir_params_new` that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn tpir_params_free(params: *mut TpirParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Sub-packetization L: symbols per record stripe. Returns 0 on null.
///
/// # Safety
/// `params` must be null or a live handle from `tpir_params_new`.
#[no_mangle]
pub unsafe extern "C" fn tpir_params_sub_packetization(params: *const TpirParams) -> u64 {
    if params.is_null() {
        return 0;
    }
    (*params).inner.sub_packetization as u64
}

/// Total download D: symbols fetched per retrieval per stripe. Returns 0
/// on null.
///
/// # Safety
/// `params` must be null or a live handle from `tpir_params_new`.
#[no_mangle]
pub unsafe extern "C" fn tpir_params_download(params: *const TpirParams) -> u64 {
    if params.is_null() {
        return 0;
    }
    (*params).inner.download as u64
}

/// Mixing width: columns of the expanding matrices for undesired records.
/// Returns 0 on null.
///
/// # Safety
/// `params` must be null or a live handle from `tpir_params_new`.
#[no_mangle]
pub unsafe extern "C" fn tpir_params_mixing_width(params: *const TpirParams) -> u64 {
    if params.is_null() {
        return 0;
    }
    (*params).inner.mixing_width as u64
}

/// Smallest admissible prime field size. Returns 0 on null.
///
/// # Safety
/// `params` must be null or a live handle from `tpir_params_new`.
#[no_mangle]
pub unsafe extern "C" fn tpir_params_q_min(params: *const TpirParams) -> u64 {
    if params.is_null() {
        return 0;
    }
    (*params).inner.q_min
}

/// Retrieval rate L/D (equals the capacity) as an exact fraction.
///
/// # Safety
/// `params` must be a live handle; `num` and `den` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tpir_params_rate(
    params: *const TpirParams,
    num: *mut u64,
    den: *mut u64,
) -> TpirStatus {
    if params.is_null() || num.is_null() || den.is_null() {
        return TpirStatus::NullArgument;
    }
    match capacity((*params).inner.config) {
        Ok(c) => {
            *num = *c.numer() as u64;
            *den = *c.denom() as u64;
            TpirStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Run one seeded in-process retrieval round trip over a random database:
/// build queries for record `theta`, answer them at all servers, decode,
/// and compare against the stored record. Returns Ok only on an exact
/// match. `q` of 0 selects the smallest admissible field.
///
/// # Safety
/// `params` must be a live handle from `tpir_params_new`.
#[no_mangle]
pub unsafe extern "C" fn tpir_self_test(
    params: *const TpirParams,
    q: u64,
    theta: u32,
    seed: u64,
) -> TpirStatus {
    if params.is_null() {
        return TpirStatus::NullArgument;
    }
    let p = &(*params).inner;
    let result = catch_unwind(AssertUnwindSafe(|| self_test(p, q, theta as usize, seed)));
    match result {
        Ok(Ok(true)) => TpirStatus::Ok,
        Ok(Ok(false)) => TpirStatus::Runtime,
        Ok(Err(e)) => status_of(&e),
        Err(_) => TpirStatus::Runtime,
    }
}

fn self_test(p: &SchemeParams, q: u64, theta: usize, seed: u64) -> Result<bool, Error> {
    let q = if q == 0 { p.q_min } else { q };
    p.check_field(q)?;
    let field = PrimeField::new(q)?;
    let schedule = build_schedule(p)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let db = Database::random(field, p.config.records, p.sub_packetization, 2, &mut rng)?;
    let qs = generate_queries(&schedule, field, theta, &mut rng)?;
    let answers: Vec<FieldMatrix> = (0..p.config.servers)
        .map(|j| answer(&db, &qs.matrices[j]))
        .collect::<Result<_, _>>()?;
    let record = decode(&schedule, field, &qs.mix, &answers)?;
    Ok(&record == db.record(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn handle_lifecycle_and_getters() {
        unsafe {
            let mut h: *mut TpirParams = ptr::null_mut();
            assert_eq!(tpir_params_new(3, 2, 3, &mut h), TpirStatus::Ok);
            assert!(!h.is_null());
            assert_eq!(tpir_params_sub_packetization(h), 9);
            assert_eq!(tpir_params_download(h), 19);
            assert_eq!(tpir_params_mixing_width(h), 6);
            assert_eq!(tpir_params_q_min(h), 7);
            let (mut num, mut den) = (0u64, 0u64);
            assert_eq!(tpir_params_rate(h, &mut num, &mut den), TpirStatus::Ok);
            assert_eq!((num, den), (9, 19));
            tpir_params_free(h);
        }
    }

    #[test]
    fn invalid_config_and_null_args() {
        unsafe {
            let mut h: *mut TpirParams = ptr::null_mut();
            assert_eq!(tpir_params_new(2, 2, 2, &mut h), TpirStatus::InvalidConfig);
            assert!(h.is_null());
            assert_eq!(
                tpir_params_new(3, 2, 2, ptr::null_mut()),
                TpirStatus::NullArgument
            );
            assert_eq!(tpir_params_sub_packetization(ptr::null()), 0);
            tpir_params_free(ptr::null_mut()); // must not crash
        }
    }

    #[test]
    fn self_test_round_trips() {
        unsafe {
            let mut h: *mut TpirParams = ptr::null_mut();
            assert_eq!(tpir_params_new(3, 2, 2, &mut h), TpirStatus::Ok);
            for theta in 0..2 {
                assert_eq!(tpir_self_test(h, 0, theta, 42), TpirStatus::Ok);
            }
            // q below the minimum is rejected
            assert_eq!(tpir_self_test(h, 2, 0, 42), TpirStatus::FieldTooSmall);
            tpir_params_free(h);
        }
    }

    #[test]
    fn generated_header_exists() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("tpir.h");
        let text = std::fs::read_to_string(header).unwrap();
        for symbol in [
            "tpir_params_new",
            "tpir_params_free",
            "tpir_params_rate",
            "tpir_self_test",
            "TPIR_STATUS_FIELD_TOO_SMALL",
        ] {
            assert!(text.contains(symbol), "header missing {symbol}");
        }
    }
}
