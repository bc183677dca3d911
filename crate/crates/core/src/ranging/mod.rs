//! Time-of-flight ranging by two-way timestamp exchange, and monostatic
//! radar ranging with Doppler from the back-scattered waveform.

pub mod radar;
pub mod twr;

pub use radar::{
    block_phases, cancel_self_interference, delay_to_range, detect_echoes, doppler_velocity, echo_range,
    echo_range_with, generate_echo, probe_waveform, round_trip_samples, DopplerConfig, EchoRangeConfig, EchoScene,
    RangeEstimate,
};
pub use twr::{twr_range, TwrExchange};
