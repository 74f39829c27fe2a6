#![no_main]
use libfuzzer_sys::fuzz_target;
use rsfringe::io::{decode_image, encode_image, Encoding};

fuzz_target!(|data: &[u8]| {
    let Ok(img) = decode_image(data) else { return };
    assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(img.data().len(), img.rows() * img.cols() * img.channels().count());
    // an 8-bit PNM re-encode is lossless from here on
    let once = decode_image(&encode_image(&img, Encoding::Pnm)).unwrap();
    let twice = decode_image(&encode_image(&once, Encoding::Pnm)).unwrap();
    assert_eq!(once, twice);
});
