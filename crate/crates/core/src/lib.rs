//! Energy-aware trajectory planning for a robot whose uplink is assisted by an
//! intelligent reflecting surface (IRS).

pub mod baselines;
pub mod channel;
pub mod graphinit;
pub mod radiomap;
pub mod rmap;
pub mod scenario;
pub mod socp;
