use std::ffi::{c_char, CString};
use std::ptr;

use irsplan_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { irs_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn plan_through_handles() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(irs_scenario_reference(&mut s), IrsStatus::Ok);
        assert_eq!(irs_scenario_slots(s), 30);
        assert_eq!(irs_scenario_set_link(s, 64, 2e9), IrsStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(irs_model_fit(s, 40, 24, 20, 3, &mut m), IrsStatus::Ok);
        let mut p = ptr::null_mut();
        assert_eq!(irs_plan(s, m, irs_sco_options_default(), &mut p), IrsStatus::Ok);
        let n = irs_plan_len(p);
        assert_eq!(n, 31);
        let mut xy = vec![0.0; 2 * n];
        assert_eq!(irs_plan_waypoints(p, xy.as_mut_ptr(), n), n);
        assert_eq!((xy[0], xy[1]), (9.5, 15.5));
        let mut e = 0.0;
        assert_eq!(irs_motion_energy(s, xy.as_ptr(), n, &mut e), IrsStatus::Ok);
        assert_eq!(e, irs_plan_energy(p));
        assert!(irs_plan_rate(p) >= 2e9 * (1.0 - 1e-6));
        assert_eq!(irs_plan_initial_label(p), IrsInitLabel::MinEnergy);
        irs_plan_free(p);
        irs_model_free(m);
        irs_scenario_free(s);
    }
}

#[test]
fn unreachable_rate_is_infeasible() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(irs_scenario_reference(&mut s), IrsStatus::Ok);
        assert_eq!(irs_scenario_set_link(s, 0, 50e9), IrsStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(irs_model_fit(s, 20, 12, 5, 1, &mut m), IrsStatus::Ok);
        let mut p = ptr::NonNull::<IrsPlan>::dangling().as_ptr();
        assert_eq!(irs_plan(s, m, irs_sco_options_default(), &mut p), IrsStatus::Infeasible);
        assert!(p.is_null());
        assert!(last_error().contains("initial"));
        irs_model_free(m);
        irs_scenario_free(s);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut s = ptr::null_mut();
        let bad = CString::new("[workspace]\nx = [0.0, 1.0]\nbogus = 1\n").unwrap();
        assert_eq!(irs_scenario_from_toml(bad.as_ptr(), &mut s), IrsStatus::Config);
        assert!(s.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(irs_scenario_from_toml(ptr::null(), &mut s), IrsStatus::NullPointer);
        assert_eq!(last_error(), "toml is null");
        let mut e = 0.0;
        assert_eq!(
            irs_motion_energy(ptr::null(), ptr::null(), 0, &mut e),
            IrsStatus::NullPointer
        );
        let mut m = ptr::null_mut();
        let model = CString::new("version = 9\n").unwrap();
        assert_eq!(irs_model_from_toml(model.as_ptr(), &mut m), IrsStatus::Config);
        // Wrong waypoint count.
        assert_eq!(irs_scenario_reference(&mut s), IrsStatus::Ok);
        let xy = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(irs_motion_energy(s, xy.as_ptr(), 2, &mut e), IrsStatus::InvalidArgument);
        irs_scenario_free(s);
        // Freeing null is a no-op.
        irs_scenario_free(ptr::null_mut());
        irs_model_free(ptr::null_mut());
        irs_plan_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/irsplan.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
