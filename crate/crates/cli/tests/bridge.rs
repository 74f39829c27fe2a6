use rsfringe::detector::{
    AdapterCommand, Detector, DetectorVerdict, Embedder, ExternalConfig, ExternalOracle, OracleError,
    StubFringeDetector, StubProfileEmbedder,
};
use rsfringe::io::synth_face;
use std::time::Duration;

const ADAPTER: &str = env!("CARGO_BIN_EXE_rsfringe-stub-adapter");

fn oracle(args: &[&str], scratch: &std::path::Path) -> ExternalOracle {
    let mut config = ExternalConfig::new(AdapterCommand::new(ADAPTER, args.iter().copied()), scratch);
    config.timeout = Duration::from_millis(500);
    config.embedding_dim = Some(16);
    ExternalOracle::spawn(config).unwrap()
}

#[test]
fn healthy_adapter_matches_the_stubs() {
    let dir = tempfile::tempdir().unwrap();
    let mut ext = oracle(&[], dir.path());
    let mut det = StubFringeDetector::default();
    let mut emb = StubProfileEmbedder::new(16);
    for seed in 0..3 {
        let face = synth_face(seed, 96, 96).unwrap();
        assert_eq!(ext.detect(&face).unwrap(), det.detect(&face).unwrap());
        let (a, b) = (ext.embed(&face).unwrap(), emb.embed(&face).unwrap());
        let gap = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        // the adapter sees the 8-bit staged copy
        assert!(gap < 0.01, "{gap}");
    }
    assert_eq!(ext.detect(&synth_face(0, 96, 96).unwrap()).unwrap(), DetectorVerdict::Present);
}

fn first_error(fault: &str, embed: bool) -> OracleError {
    let dir = tempfile::tempdir().unwrap();
    let mut ext = oracle(&["--fault", fault, "--sleep-ms", "3000"], dir.path());
    let face = synth_face(0, 96, 96).unwrap();
    if embed {
        ext.embed(&face).unwrap_err()
    } else {
        ext.detect(&face).unwrap_err()
    }
}

#[test]
fn faults_map_to_oracle_errors() {
    assert!(matches!(first_error("bad-id", false), OracleError::Protocol(_)));
    assert!(matches!(first_error("wrong-dim", true), OracleError::Protocol(_)));
    assert!(matches!(first_error("malformed", false), OracleError::Protocol(_)));
    assert!(matches!(first_error("remote-error", false), OracleError::Remote(m) if m == "model crashed"));
    assert!(matches!(first_error("sleep", false), OracleError::Timeout(_)));
    let exit = first_error("exit", false);
    assert!(!matches!(exit, OracleError::Remote(_) | OracleError::Timeout(_)), "{exit:?}");
}

#[test]
fn remote_errors_keep_the_bridge_usable() {
    let dir = tempfile::tempdir().unwrap();
    // only the first request is answered correctly
    let mut ext = oracle(&["--fault", "remote-error", "--fault-after", "1"], dir.path());
    assert!(ext.detect(&synth_face(0, 96, 96).unwrap()).is_ok());
    assert!(matches!(ext.detect(&synth_face(1, 96, 96).unwrap()), Err(OracleError::Remote(_))));
    assert!(matches!(ext.detect(&synth_face(2, 96, 96).unwrap()), Err(OracleError::Remote(_))));
}

#[test]
fn a_broken_stream_stays_broken() {
    let dir = tempfile::tempdir().unwrap();
    let mut ext = oracle(&["--fault", "bad-id", "--fault-after", "1"], dir.path());
    assert!(ext.detect(&synth_face(0, 96, 96).unwrap()).is_ok());
    assert!(matches!(ext.detect(&synth_face(1, 96, 96).unwrap()), Err(OracleError::Protocol(_))));
    // nothing is answered once the stream is out of step, cached or not
    for seed in [0, 3] {
        assert!(matches!(ext.detect(&synth_face(seed, 96, 96).unwrap()), Err(OracleError::Unavailable(_))));
    }
}
