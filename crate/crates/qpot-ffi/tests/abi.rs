//! Checks that the shipped header stays in lockstep with the exported
//! symbols, and drives a full solve/export round trip through the C
//! entry points.

use std::ffi::CString;

use qpot_ffi::*;

/// Every exported function must appear in the committed header, and the
/// header must not advertise functions that no longer exist.
#[test]
fn header_lists_exactly_the_exported_functions() {
    let src = include_str!("../src/lib.rs");
    let header = include_str!("../include/qpot.h");

    let mut exported: Vec<&str> = Vec::new();
    for line in src.lines() {
        let line = line.trim_start();
        for prefix in ["pub unsafe extern \"C\" fn ", "pub extern \"C\" fn "] {
            if let Some(rest) = line.strip_prefix(prefix) {
                let name = rest.split('(').next().unwrap().trim();
                exported.push(name);
            }
        }
    }
    assert!(
        exported.len() >= 10,
        "expected the full surface, found {}",
        exported.len()
    );

    for name in &exported {
        let declared = header
            .lines()
            .any(|l| l.contains(&format!("{name}(")) && !l.trim_start().starts_with("//"));
        assert!(declared, "header is missing `{name}`");
    }

    for line in header.lines() {
        let line = line.trim();
        if line.starts_with("//") || !line.contains("qpot_") || !line.contains('(') {
            continue;
        }
        if let Some(pos) = line.find("qpot_") {
            let name: String = line[pos..]
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                .collect();
            assert!(
                exported.contains(&name.as_str()),
                "header declares `{name}` but the library does not export it"
            );
        }
    }
}

/// Solve through the C interface, export the grid, and read it back with
/// the native library to confirm both sides describe the same function.
#[test]
fn exported_grids_reload_with_identical_values() {
    let compact = qpot_compact_new();
    let center = [0.0f64; 4];
    assert_eq!(
        unsafe { qpot_compact_add_ball(compact, center.as_ptr(), 0.5) },
        QpotStatus::QpotOk
    );

    let mut handle: *mut QpotExtremal = std::ptr::null_mut();
    assert_eq!(
        unsafe { qpot_extremal_solve(compact, 1.0, 9, 1e-8, &mut handle) },
        QpotStatus::QpotOk
    );

    let mut iterations = 0u64;
    let mut residual = f64::NAN;
    assert_eq!(
        unsafe { qpot_extremal_info(handle, &mut iterations, &mut residual) },
        QpotStatus::QpotOk
    );
    assert!(iterations > 0);
    assert!(residual.is_finite() && residual <= 1e-8);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extremal.grid");
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { qpot_extremal_export(handle, c_path.as_ptr()) },
        QpotStatus::QpotOk
    );

    let mut file = std::fs::File::open(&path).unwrap();
    let reloaded = qpot::grid::GridFunction::import(&mut file).unwrap();
    assert_eq!(reloaded.geom().resolution(), 9);

    let mut probe = [0.0f64; 4];
    let mut via_ffi = f64::NAN;
    let h = reloaded.geom().spacing();
    for step in 0..3 {
        probe[0] = step as f64 * h;
        assert_eq!(
            unsafe { qpot_extremal_value(handle, probe.as_ptr(), &mut via_ffi) },
            QpotStatus::QpotOk
        );
        let idx = [
            4 + step as usize,
            4,
            4,
            4,
        ];
        let via_file = reloaded.value(reloaded.geom().flat(idx));
        assert_eq!(via_ffi, via_file, "cell {step} differs between routes");
    }

    unsafe { qpot_extremal_free(handle) };
    unsafe { qpot_compact_free(compact) };
}

/// An unwritable export path must come back as an io failure with the
/// path in the message, not a crash.
#[test]
fn export_failures_report_io_status() {
    let compact = qpot_compact_new();
    let center = [0.0f64; 4];
    assert_eq!(
        unsafe { qpot_compact_add_ball(compact, center.as_ptr(), 0.5) },
        QpotStatus::QpotOk
    );
    let mut handle: *mut QpotExtremal = std::ptr::null_mut();
    assert_eq!(
        unsafe { qpot_extremal_solve(compact, 1.0, 5, 1e-6, &mut handle) },
        QpotStatus::QpotOk
    );

    let bogus = CString::new("/no-such-directory/extremal.grid").unwrap();
    assert_eq!(
        unsafe { qpot_extremal_export(handle, bogus.as_ptr()) },
        QpotStatus::QpotErrIo
    );

    let len = unsafe { qpot_last_error(std::ptr::null_mut(), 0) };
    let mut buf = vec![0u8; len + 1];
    unsafe { qpot_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    let message = std::str::from_utf8(&buf[..len]).unwrap();
    assert!(message.contains("io error"), "unexpected message: {message}");

    unsafe { qpot_extremal_free(handle) };
    unsafe { qpot_compact_free(compact) };
}
