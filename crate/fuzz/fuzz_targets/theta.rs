#![no_main]
use libfuzzer_sys::fuzz_target;
use rsfringe::PerturbationParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(theta) = text.parse::<PerturbationParams>() {
        let back: PerturbationParams = theta.to_string().parse().unwrap();
        assert_eq!(back, theta);
        assert!(theta.period_rows() > 0.0);
    }
});
