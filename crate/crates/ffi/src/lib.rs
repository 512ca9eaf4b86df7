//! C ABI surface over the sentiq engine: an opaque database handle opened
//! from a built data directory, JSON-emitting interpret/query calls, status
//! codes, and thread-local error messages.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use sentiq::config::Config;
use sentiq::db::{files, Database};
use sentiq::error::Error;
use sentiq::query::{evaluate, evaluate_hard, parse, Variant};

/// Result codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentiqStatus {
    /// The call succeeded.
    Ok = 0,
    /// A pointer argument was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// Input data, artifacts, configuration, or query text were unusable.
    DataError = 2,
    /// An engine invariant failed.
    InternalError = 3,
}

/// Opaque handle to a loaded database.
pub struct SentiqDb {
    inner: Database,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let stored = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn status_of(err: &Error) -> SentiqStatus {
    match err {
        Error::AllTokensOutOfVocabulary(_)
        | Error::DomainTooSmall { .. }
        | Error::AttributeMismatch { .. }
        | Error::DegenerateLabels
        | Error::Infeasible(_)
        | Error::FuzzyDomain(_) => SentiqStatus::InternalError,
        _ => SentiqStatus::DataError,
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated C string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SentiqStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} must not be null"));
        return Err(SentiqStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        SentiqStatus::InvalidArgument
    })
}

fn emit_string(value: String, out: *mut *mut c_char) -> SentiqStatus {
    let cstring = match CString::new(value) {
        Ok(s) => s,
        Err(_) => {
            set_error("output contained an interior NUL byte");
            return SentiqStatus::InternalError;
        }
    };
    unsafe { *out = cstring.into_raw() };
    SentiqStatus::Ok
}

fn guard(body: impl FnOnce() -> SentiqStatus) -> SentiqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in sentiq".to_string());
            set_error(&message);
            SentiqStatus::InternalError
        }
    }
}

/// Open a database previously produced by `sentiq build`.
///
/// `data_dir` holds the JSONL inputs; `build_dir` holds the artifacts and
/// may be null to use `<data_dir>/build`. `config_path` may be null for
/// default settings or point at a TOML settings file. On success `*out`
/// receives a handle that must be released with `sentiq_db_close`.
///
/// # Safety
/// All pointer arguments must be null or valid per their descriptions, and
/// `out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn sentiq_db_open(
    data_dir: *const c_char,
    build_dir: *const c_char,
    config_path: *const c_char,
    out: *mut *mut SentiqDb,
) -> SentiqStatus {
    guard(|| {
        if out.is_null() {
            set_error("out must not be null");
            return SentiqStatus::InvalidArgument;
        }
        *out = ptr::null_mut();
        let data_dir = match required_str(data_dir, "data_dir") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        let build_dir = if build_dir.is_null() {
            data_dir.join(files::BUILD_DIR)
        } else {
            match required_str(build_dir, "build_dir") {
                Ok(s) => PathBuf::from(s),
                Err(status) => return status,
            }
        };
        let config = if config_path.is_null() {
            Config::default()
        } else {
            match required_str(config_path, "config_path") {
                Ok(s) => match Config::load(Path::new(s)) {
                    Ok(c) => c,
                    Err(e) => {
                        set_error(&e.to_string());
                        return status_of(&e);
                    }
                },
                Err(status) => return status,
            }
        };
        match Database::load(&data_dir, &build_dir, config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SentiqDb { inner }));
                SentiqStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a handle returned by `sentiq_db_open`. Null is a no-op.
///
/// # Safety
/// `db` must be null or a handle from `sentiq_db_open` not yet closed.
#[no_mangle]
pub unsafe extern "C" fn sentiq_db_close(db: *mut SentiqDb) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Interpret one free-text predicate; `*out_json` receives the
/// interpretation (body, confidence, method) as a JSON document.
///
/// # Safety
/// `db` must be a live handle; `predicate` a valid C string; `out_json`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sentiq_interpret_json(
    db: *const SentiqDb,
    predicate: *const c_char,
    out_json: *mut *mut c_char,
) -> SentiqStatus {
    guard(|| {
        if db.is_null() || out_json.is_null() {
            set_error("db and out_json must not be null");
            return SentiqStatus::InvalidArgument;
        }
        let predicate = match required_str(predicate, "predicate") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let interpretation = (*db).inner.interpret_cached(predicate);
        match serde_json::to_string(&interpretation) {
            Ok(json) => emit_string(json, out_json),
            Err(e) => {
                set_error(&e.to_string());
                SentiqStatus::InternalError
            }
        }
    })
}

/// Evaluate a query in the engine dialect and emit the ranked result
/// (entities, degrees, per-condition degrees, interpretations) as JSON.
/// `k` ≤ 0 means the configured default; `hard` nonzero switches to
/// hard-threshold semantics.
///
/// # Safety
/// `db` must be a live handle; `sql` a valid C string; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sentiq_query_json(
    db: *const SentiqDb,
    sql: *const c_char,
    k: i32,
    hard: i32,
    out_json: *mut *mut c_char,
) -> SentiqStatus {
    guard(|| {
        if db.is_null() || out_json.is_null() {
            set_error("db and out_json must not be null");
            return SentiqStatus::InvalidArgument;
        }
        let sql = match required_str(sql, "sql") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let database = &(*db).inner;
        let query = match parse(sql) {
            Ok(q) => q,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        let k = if k <= 0 {
            database.config.top_k
        } else {
            k as usize
        };
        let variant: Variant = database.config.fuzzy_variant;
        let result = if hard != 0 {
            evaluate_hard(
                database,
                &query,
                &BTreeMap::new(),
                database.config.hard_threshold,
                k,
                variant,
            )
        } else {
            evaluate(database, &query, k, variant)
        };
        match result {
            Ok(ranked) => match serde_json::to_string(&ranked) {
                Ok(json) => emit_string(json, out_json),
                Err(e) => {
                    set_error(&e.to_string());
                    SentiqStatus::InternalError
                }
            },
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of entities in the database, or -1 on a null handle.
///
/// # Safety
/// `db` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sentiq_entity_count(db: *const SentiqDb) -> i64 {
    if db.is_null() {
        return -1;
    }
    (*db).inner.entities.len() as i64
}

/// The last error message recorded on this thread, or null when none.
/// The returned string must be released with `sentiq_string_free`.
#[no_mangle]
pub extern "C" fn sentiq_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(message) => message.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sentiq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
