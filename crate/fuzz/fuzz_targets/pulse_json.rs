#![no_main]
use libfuzzer_sys::fuzz_target;
use rsfringe::PulseParams;

fuzz_target!(|data: &[u8]| {
    let Ok(p) = serde_json::from_slice::<PulseParams>(data) else { return };
    assert!((0.0..p.period_us()).contains(&p.phase_us()));
    let back: PulseParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(back, p);
    let level = p.level_at(p.phase_us());
    assert!(level == p.level_on() || level == p.level_off());
});
