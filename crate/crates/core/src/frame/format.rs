//! Canonical text renderings of cell values.

use std::fmt::Write;

use chrono::{Duration, NaiveDate, NaiveDateTime};

/// Shortest round-trip rendering: plain notation for magnitudes in
/// `[1e-5, 1e16)`, scientific otherwise.
pub fn write_double(out: &mut String, v: f64) {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        write!(out, "{v}").expect("write to String");
    } else {
        write!(out, "{v:e}").expect("write to String");
    }
}

pub fn format_double(v: f64) -> String {
    let mut s = String::new();
    write_double(&mut s, v);
    s
}

pub fn format_bool(v: bool) -> &'static str {
    if v {
        "TRUE"
    } else {
        "FALSE"
    }
}

/// Day zero of spreadsheet serial dates (1900 date system, with the
/// historical leap-year bug absorbed for serials after February 1900).
pub fn serial_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1899, 12, 30)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
}

/// Converts a serial day number to a timestamp, rounded to the millisecond.
pub fn serial_to_datetime(serial: f64) -> Option<NaiveDateTime> {
    if !serial.is_finite() || serial.abs() > 3.0e6 {
        return None;
    }
    let millis = (serial * 86_400_000.0).round() as i64;
    serial_epoch().checked_add_signed(Duration::milliseconds(millis))
}

/// ISO-8601 rendering: `YYYY-MM-DD` for whole days, otherwise with a time
/// part (`T`, seconds, and milliseconds only when present). Serials outside
/// the calendar fall back to the plain number.
pub fn write_date(out: &mut String, serial: f64) {
    let Some(dt) = serial_to_datetime(serial) else {
        write_double(out, serial);
        return;
    };
    let fmt = if dt.time() == chrono::NaiveTime::MIN {
        "%Y-%m-%d"
    } else if dt.and_utc().timestamp_subsec_millis() == 0 {
        "%Y-%m-%dT%H:%M:%S"
    } else {
        "%Y-%m-%dT%H:%M:%S%.3f"
    };
    write!(out, "{}", dt.format(fmt)).expect("write to String");
}

pub fn format_date(serial: f64) -> String {
    let mut s = String::new();
    write_date(&mut s, serial);
    s
}
