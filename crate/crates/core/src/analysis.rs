//! Encapsulation size of a segment list under plain SRv6 reduced
//! encapsulation, Micro SID containers and SRm6 CRH-16/CRH-32, and the
//! saving of each compressed form relative to plain SRv6.
//!
//! All arithmetic is integer or exact rational; rounding only happens when
//! a saving is rendered.

use std::fmt::Write as _;

use num_rational::Ratio;
use thiserror::Error;

use crate::usid::{usid_list_length, UsidScheme};

const IPV6_HEADER: u64 = 40;
const SRH_FIXED: u64 = 8;
const SID: u64 = 16;

/// Negative when the compressed form is larger than plain SRv6.
pub type Saving = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("segment list must hold at least one SID")]
    EmptySegmentList,
    #[error("plain encapsulation size must be positive")]
    ZeroPlainSize,
}

/// Reduced encapsulation: the first SID rides in the destination address,
/// so a single SID costs only the outer IPv6 header.
pub fn e_srv6_reduced(sl: u64) -> Result<u64, AnalysisError> {
    match sl {
        0 => Err(AnalysisError::EmptySegmentList),
        1 => Ok(IPV6_HEADER),
        n => Ok(IPV6_HEADER + SRH_FIXED + (n - 1) * SID),
    }
}

/// Size when `n_usids` uSIDs are packed into containers.
pub fn e_usid(n_usids: u64, scheme: &UsidScheme) -> Result<u64, AnalysisError> {
    let containers = usid_list_length(n_usids as usize, scheme).map_err(|_| AnalysisError::EmptySegmentList)?;
    e_srv6_reduced(containers as u64)
}

fn e_crh(sl: u64, sid_bytes: u64) -> Result<u64, AnalysisError> {
    match sl {
        0 => Err(AnalysisError::EmptySegmentList),
        1 => Ok(IPV6_HEADER + 8),
        n => Ok(IPV6_HEADER + (4 + n * sid_bytes).div_ceil(8) * 8 + 8),
    }
}

pub fn e_crh16(sl: u64) -> Result<u64, AnalysisError> {
    e_crh(sl, 2)
}

pub fn e_crh32(sl: u64) -> Result<u64, AnalysisError> {
    e_crh(sl, 4)
}

/// `1 - compressed / plain`
pub fn saving(e_compressed: u64, e_plain: u64) -> Result<Saving, AnalysisError> {
    if e_plain == 0 {
        return Err(AnalysisError::ZeroPlainSize);
    }
    Ok(Ratio::from_integer(1) - Ratio::new(e_compressed as i64, e_plain as i64))
}

/// Renders a rational with `digits` fractional digits, rounding half away
/// from zero.
pub fn format_decimal(value: Saving, digits: u32) -> String {
    let scale = 10u128.pow(digits);
    let sign = if *value.numer() < 0 { "-" } else { "" };
    let (num, den) = (
        value.numer().unsigned_abs() as u128,
        value.denom().unsigned_abs() as u128,
    );
    let scaled = (2 * num * scale + den) / (2 * den);
    let (int, frac) = (scaled / scale, scaled % scale);
    let sign = if scaled == 0 { "" } else { sign };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac:0width$}", width = digits as usize)
    }
}

/// Waypoints in the left metro, core and right metro domains, plus an
/// optional VPN SID at the egress.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub metro_left: u64,
    pub core: u64,
    pub metro_right: u64,
    pub vpn_sid: bool,
}

impl Scenario {
    pub fn uniform(waypoints: u64) -> Self {
        Scenario {
            metro_left: waypoints,
            core: waypoints,
            metro_right: waypoints,
            vpn_sid: true,
        }
    }

    pub fn total_sids(&self) -> u64 {
        self.metro_left + self.core + self.metro_right + u64::from(self.vpn_sid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncapReport {
    pub scenario: Scenario,
    pub plain_srv6: u64,
    pub usid: u64,
    pub crh16: u64,
    pub crh32: u64,
    pub saving_usid: Saving,
    pub saving_crh16: Saving,
    pub saving_crh32: Saving,
}

pub fn report(scenario: Scenario, scheme: &UsidScheme) -> Result<EncapReport, AnalysisError> {
    let n = scenario.total_sids();
    let plain_srv6 = e_srv6_reduced(n)?;
    let usid = e_usid(n, scheme)?;
    let crh16 = e_crh16(n)?;
    let crh32 = e_crh32(n)?;
    Ok(EncapReport {
        scenario,
        plain_srv6,
        usid,
        crh16,
        crh32,
        saving_usid: saving(usid, plain_srv6)?,
        saving_crh16: saving(crh16, plain_srv6)?,
        saving_crh32: saving(crh32, plain_srv6)?,
    })
}

/// One report per waypoint count `1..=max_waypoints`, the same count in
/// each of the three domains.
pub fn sweep_scenarios(max_waypoints: u64, scheme: &UsidScheme) -> Vec<EncapReport> {
    (1..=max_waypoints)
        .map(|t| report(Scenario::uniform(t), scheme).expect("uniform scenarios are non-empty"))
        .collect()
}

pub const CSV_HEADER: &str = "waypoints_per_domain,total_sids,e_plain,e_usid,e_crh16,e_crh32,es_usid,es_crh16,es_crh32";

pub fn to_csv(reports: &[EncapReport]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario.metro_left,
            r.scenario.total_sids(),
            r.plain_srv6,
            r.usid,
            r.crh16,
            r.crh32,
            format_decimal(r.saving_usid, 4),
            format_decimal(r.saving_crh16, 4),
            format_decimal(r.saving_crh32, 4),
        );
    }
    out
}
