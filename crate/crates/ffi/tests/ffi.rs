use std::ffi::{CStr, CString};
use std::ptr;

use fdqn::agent::AlgoVariant;
use fdqn::neural::{NetworkParams, NUM_ACTIONS, STATE_DIM};
use fdqn_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROOM: &str = "\
######
#S...#
#....#
######
";

fn last_error() -> Option<String> {
    let p = fdqn_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn grid(text: &str) -> *mut FdqnGrid {
    let c = CString::new(text).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { fdqn_grid_from_map(c.as_ptr(), &mut g) }, FdqnStatus::Ok);
    g
}

fn state() -> Vec<f64> {
    let mut s = vec![0.0; STATE_DIM];
    s[0] = 0.3;
    s[1] = 0.6;
    s[6] = 0.5;
    s[7] = 0.25;
    s[8] = 0.75;
    s[9] = 0.5;
    s
}

#[test]
fn grid_round_trip_and_similarity() {
    let g = grid(ROOM);
    let (mut w, mut h) = (0, 0);
    assert_eq!(unsafe { fdqn_grid_dims(g, &mut w, &mut h) }, FdqnStatus::Ok);
    assert_eq!((w, h), (6, 4));
    assert!(last_error().is_none());

    let mut pgm = ptr::null_mut();
    assert_eq!(unsafe { fdqn_grid_to_pgm(g, &mut pgm) }, FdqnStatus::Ok);
    assert!(unsafe { CStr::from_ptr(pgm) }.to_str().unwrap().starts_with("P2"));
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { fdqn_grid_from_pgm(pgm, &mut back) }, FdqnStatus::Ok);
    unsafe { fdqn_string_free(pgm) };

    let (mut score, mut pass) = (0.0, false);
    assert_eq!(
        unsafe { fdqn_map_similarity(g, back, &mut score, &mut pass) },
        FdqnStatus::Ok
    );
    assert_eq!(score, 1.0);
    assert!(pass);

    let other = grid("####\n#S.#\n####\n");
    assert_eq!(
        unsafe { fdqn_map_similarity(g, other, &mut score, &mut pass) },
        FdqnStatus::DimensionMismatch
    );
    assert!(last_error().is_some());

    unsafe {
        fdqn_grid_free(g);
        fdqn_grid_free(back);
        fdqn_grid_free(other);
        fdqn_grid_free(ptr::null_mut());
    }
}

#[test]
fn bad_input_reports_status_and_message() {
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { fdqn_grid_from_map(ptr::null(), &mut g) },
        FdqnStatus::NullPointer
    );
    assert!(last_error().unwrap().contains("null"));
    assert!(g.is_null());

    let bad = CString::new("#S?#\n").unwrap();
    assert_eq!(unsafe { fdqn_grid_from_map(bad.as_ptr(), &mut g) }, FdqnStatus::Parse);
    assert!(!last_error().unwrap().is_empty());

    let garbage = CString::new("FDQN 1 dqn\nnot numbers\n").unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(
        unsafe { fdqn_network_load(garbage.as_ptr(), &mut net) },
        FdqnStatus::Parse
    );

    let (mut w, mut h) = (0, 0);
    assert_eq!(
        unsafe { fdqn_grid_dims(ptr::null(), &mut w, &mut h) },
        FdqnStatus::NullPointer
    );

    // A success clears the previous message.
    grid(ROOM);
    assert!(last_error().is_none());
}

#[test]
fn network_matches_the_library() {
    for (algo, variant) in [
        (FdqnAlgo::Dqn, AlgoVariant::Dqn),
        (FdqnAlgo::Ddqn, AlgoVariant::Ddqn),
        (FdqnAlgo::DuelingDqn, AlgoVariant::DuelingDqn),
        (FdqnAlgo::DuelingDdqn, AlgoVariant::DuelingDdqn),
    ] {
        let mut net = ptr::null_mut();
        assert_eq!(unsafe { fdqn_network_init(algo, 11, &mut net) }, FdqnStatus::Ok);
        let mut got = FdqnAlgo::Dqn;
        assert_eq!(unsafe { fdqn_network_algo(net, &mut got) }, FdqnStatus::Ok);
        assert_eq!(got, algo);

        let s = state();
        let mut q = [0.0; NUM_ACTIONS];
        assert_eq!(
            unsafe { fdqn_network_forward(net, s.as_ptr(), s.len(), q.as_mut_ptr(), q.len()) },
            FdqnStatus::Ok
        );
        let reference = NetworkParams::init(variant.topology(), &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(q.to_vec(), reference.q_values(&s).unwrap());

        // Only slots 0 and 1 hold centroids.
        let mut action = usize::MAX;
        assert_eq!(
            unsafe { fdqn_network_select_action(net, s.as_ptr(), s.len(), 10.0, &mut action) },
            FdqnStatus::Ok
        );
        assert_eq!(action, if q[0] >= q[1] { 0 } else { 1 });

        let mut text = ptr::null_mut();
        assert_eq!(unsafe { fdqn_network_save(net, &mut text) }, FdqnStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(unsafe { fdqn_network_load(text, &mut loaded) }, FdqnStatus::Ok);
        let mut q2 = [0.0; NUM_ACTIONS];
        assert_eq!(
            unsafe { fdqn_network_forward(loaded, s.as_ptr(), s.len(), q2.as_mut_ptr(), q2.len()) },
            FdqnStatus::Ok
        );
        assert_eq!(q, q2);

        unsafe {
            fdqn_string_free(text);
            fdqn_network_free(net);
            fdqn_network_free(loaded);
        }
    }
}

#[test]
fn network_rejects_bad_lengths() {
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { fdqn_network_init(FdqnAlgo::Dqn, 0, &mut net) }, FdqnStatus::Ok);
    let s = state();
    let mut q = [0.0; NUM_ACTIONS];
    assert_eq!(
        unsafe { fdqn_network_forward(net, s.as_ptr(), s.len() - 1, q.as_mut_ptr(), q.len()) },
        FdqnStatus::DimensionMismatch
    );
    assert_eq!(
        unsafe { fdqn_network_forward(net, s.as_ptr(), s.len(), q.as_mut_ptr(), q.len() - 1) },
        FdqnStatus::DimensionMismatch
    );
    assert_eq!(
        unsafe { fdqn_network_forward(net, s.as_ptr(), s.len(), ptr::null_mut(), q.len()) },
        FdqnStatus::NullPointer
    );
    assert!(last_error().unwrap().contains("q_out"));
    unsafe { fdqn_network_free(net) };
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/fdqn.h");
    for name in [
        "fdqn_last_error",
        "fdqn_string_free",
        "fdqn_grid_from_map",
        "fdqn_grid_from_pgm",
        "fdqn_grid_free",
        "fdqn_grid_dims",
        "fdqn_grid_to_pgm",
        "fdqn_map_similarity",
        "fdqn_network_init",
        "fdqn_network_load",
        "fdqn_network_save",
        "fdqn_network_free",
        "fdqn_network_algo",
        "fdqn_network_forward",
        "fdqn_network_select_action",
        "FDQN_STATUS_DIMENSION_MISMATCH = 4",
        "typedef struct FdqnGrid FdqnGrid;",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
