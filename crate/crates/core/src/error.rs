use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("reflection coefficient is singular (z_load + z_ref = 0)")]
    SingularReflection,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("cascade needs at least one element")]
    EmptyCascade,
    #[error("element value must be positive and finite, got {0}")]
    InvalidValue(f64),
    #[error("q factor must be positive, got {0}")]
    InvalidQ(f64),
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency grid must be strictly increasing (index {0})")]
    UnsortedGrid(usize),
    #[error("singular transformation at {frequency_hz} Hz")]
    Singular { frequency_hz: f64 },
    #[error("input impedance is indeterminate (0/0)")]
    Indeterminate,
    #[error(transparent)]
    Unit(#[from] UnitError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("source and load are already matched; no transformation required")]
    NoTransformationRequired,
    #[error("impedance {0} has no resistive part; purely reactive loads cannot be matched")]
    PurelyReactive(String),
    #[error("loaded Q {requested} is below the minimum {minimum} for this resistance ratio")]
    InfeasibleQ { requested: f64, minimum: f64 },
    #[error("pi topology would need a negative shunt capacitance ({side} side)")]
    NegativeShunt { side: &'static str },
    #[error("synthesized network misses the -30 dB target: {achieved_db} dB")]
    VerificationFailed { achieved_db: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("steps per period must be at least 64, got {0}")]
    TooFewSteps(usize),
    #[error("max periods must be at least 10, got {0}")]
    TooFewPeriods(usize),
    #[error("time step too coarse: diode current changed by {ratio:.3} of its peak in one step")]
    Resolution { ratio: f64 },
    #[error("newton iteration failed at t = {time} s after {iterations} iterations")]
    Newton { time: f64, iterations: usize },
    #[error("singular nodal matrix")]
    SingularMatrix,
    #[error("fundamental input current is zero; impedance undefined")]
    ZeroFundamentalCurrent,
    #[error("solution did not converge")]
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MppError {
    #[error("load range must satisfy 0 < min < max, got ({0}, {1})")]
    InvalidRange(f64, f64),
    #[error("coarse sweep needs at least 8 points, got {0}")]
    TooFewPoints(usize),
    #[error("input power list is empty")]
    EmptySweep,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PmicError {
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("time step {dt} exceeds the MPPT sample period {period}")]
    StepExceedsSamplePeriod { dt: f64, period: f64 },
    #[error("non-finite energy in state update")]
    NonFiniteEnergy,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("hold voltage {hold} V outside [{min}, {max}] V")]
    HoldVoltage { hold: f64, min: f64, max: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("distance must be positive, got {0} m")]
    InvalidDistance(f64),
    #[error("target {target_dbm} dBm is not below the EIRP of {eirp_dbm} dBm")]
    Unreachable { target_dbm: f64, eirp_dbm: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("front end must use the pi matching network")]
    NotMatched,
    #[error("no {knob} in [{lo}, {hi}] reaches the target")]
    NoBracket { knob: &'static str, lo: f64, hi: f64 },
    #[error("fitted {knob} = {value} is outside its physical range")]
    OutOfRange { knob: &'static str, value: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Mpp(#[from] MppError),
    #[error(transparent)]
    Pmic(#[from] PmicError),
    #[error(transparent)]
    Unit(#[from] UnitError),
}
