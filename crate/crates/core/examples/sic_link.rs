//! One noisy superimposed symbol through the SIC receivers, then a VOOK
//! framed bit stream round trip.
//!
//! `cargo run --example sic_link`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vlc_noma::link::{
    extract_vook, fpa_allocate, frame_vook, sic_decode, superimpose, vook_decode, vook_encode,
    DimmingConfig,
};

fn main() -> vlc_noma::Result<()> {
    let alloc = fpa_allocate(0.25, 0.3, 3)?;
    let gain = 5e-5;
    let bits = [true, false, true];
    let clean = gain * superimpose(&bits, &alloc);
    let noise = Normal::new(0.0, 1e-7).expect("valid std");
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    println!("powers {:?}", alloc.powers());
    println!("sent   {bits:?}");
    for _ in 0..3 {
        let y = clean + noise.sample(&mut rng);
        let traces: Vec<String> = (1..=3)
            .map(|k| format!("{:?}", sic_decode(y, k, gain, &alloc, 1.0).trace))
            .collect();
        println!("y = {y:.4e}  traces {}", traces.join(" "));
    }

    let dim = DimmingConfig::vook(0.3)?;
    let data = [true, false, false, true];
    let stream = frame_vook(&data, &dim)?;
    let show = |v: &[bool]| {
        v.iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect::<String>()
    };
    println!("VOOK {}  framed  {}", dim.codeword_string(), show(&stream));
    assert_eq!(extract_vook(&stream, &dim, data.len())?, data);

    // Repetition: one bit per codeword, majority vote on the way back.
    let mut coded = vook_encode(&data, &dim)?;
    coded[0] = !coded[0];
    coded[11] = !coded[11];
    println!(
        "VOOK {}  coded   {} (two slots flipped)",
        dim.codeword_string(),
        show(&coded)
    );
    assert_eq!(vook_decode(&coded, &dim)?, data);
    Ok(())
}
