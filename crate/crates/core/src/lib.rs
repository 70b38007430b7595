//! SRv6 Micro SID (uSID) dataplane model: packet codec, forwarding tables,
//! uSID container arithmetic, endpoint behaviors, encapsulation-size
//! analysis, a discrete network simulator and a path controller.

pub mod analysis;
pub mod behaviors;
pub mod cli;
pub mod controller;
pub mod fib;
pub mod net;
pub mod simnet;
pub mod usid;
