#![no_main]
use libfuzzer_sys::fuzz_target;
use rsfringe::detector::wire::{parse_response, validate_response, Op};

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(resp) = parse_response(line) {
        assert_eq!(parse_response(&resp.to_line()).unwrap(), resp);
    }
    for op in [Op::Detect, Op::Embed] {
        let _ = validate_response(line, 7, op, None);
        let _ = validate_response(line, 7, op, Some(16));
    }
});
