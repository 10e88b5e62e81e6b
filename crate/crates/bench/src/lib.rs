//! Shared fixtures for the benchmarks.

use csrange::signal::{gen_linear_chirp, simulate_channel_samples, ChannelPreset, ChirpSpec, SampledSignal};

/// Mote reference chirp and a 600-sample CASE_B trace at 20 dB.
pub fn mote_fixture() -> (SampledSignal, SampledSignal) {
    let p = gen_linear_chirp(&ChirpSpec::mote()).expect("mote chirp is valid");
    let ch = ChannelPreset::CaseB.profile(211, p.fs(), 20.0, 7);
    let (x, _) = simulate_channel_samples(&p, &ch, 600).expect("trace fits its window");
    (p, x)
}

/// Wideband reference chirp and a trace of `n` samples.
pub fn wideband_fixture(n: usize) -> (SampledSignal, SampledSignal) {
    let p = gen_linear_chirp(&ChirpSpec::wideband()).expect("wideband chirp is valid");
    let ch = ChannelPreset::CaseA.profile(n / 3, p.fs(), 20.0, 7);
    let (x, _) = simulate_channel_samples(&p, &ch, n).expect("trace fits its window");
    (p, x)
}
