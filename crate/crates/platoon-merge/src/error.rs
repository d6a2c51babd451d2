use thiserror::Error;

/// Errors produced by scheduling, trajectory planning, simulation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("initial speed {speed} m/s exceeds the speed limit {v_max} m/s")]
    SpeedAboveLimit { speed: f64, v_max: f64 },

    #[error("initial speed {speed} m/s is below the minimum speed {v_min} m/s")]
    SpeedBelowMinimum { speed: f64, v_min: f64 },

    #[error("weight must be positive, got {0}")]
    NonPositiveWeight(f64),

    #[error("platoon size must be at least 1")]
    EmptyPlatoon,

    #[error("headway must be positive, got {0}")]
    NonPositiveHeadway(f64),

    #[error("brute-force search limited to 9 platoons, got {0}")]
    TooManyPlatoons(usize),

    #[error("no platoons to schedule")]
    NoPlatoons,

    #[error("platoon {0} is not covered by the schedule")]
    NotScheduled(u32),

    #[error("boundary system is singular (horizon {0} s)")]
    SingularSystem(f64),

    #[error("closed-form plan violates {bound} over [{t0}, {tm}]: extreme value {value}")]
    ConstraintViolation {
        bound: &'static str,
        t0: f64,
        tm: f64,
        value: f64,
    },

    #[error("time {t} outside plan domain [{t0}, {t_end}]")]
    OutOfDomain { t: f64, t0: f64, t_end: f64 },

    #[error("scenario invalid: {0}")]
    InvalidScenario(String),

    #[error("no feasible trajectory: platoon {id} cannot delay merge entry to {t_m} (max reachable {t_max})")]
    InfeasibleDelay { id: u32, t_m: f64, t_max: f64 },

    #[error("vehicle {vehicle} of platoon {platoon} never exited the merging zone (truncated log)")]
    TruncatedLog { platoon: u32, vehicle: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
