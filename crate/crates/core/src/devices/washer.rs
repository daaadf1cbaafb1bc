use rand::Rng;

use super::{check, randomized_gate, voltage_veto, DeviceError, StepFlags, Transition};

/// Exponentially weighted update of an agent's price expectation.
pub fn update_reference_price(reference: f64, price: f64, ewma_lambda: f64) -> f64 {
    (1.0 - ewma_lambda) * reference + ewma_lambda * price
}

/// Job timing shared by a washer population: one job is released every
/// `job_interval` ticks and must start early enough to finish before the
/// next release.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WasherJobs {
    job_length: u64,
    job_interval: u64,
}

impl WasherJobs {
    pub fn new(job_length: u64, job_interval: u64) -> Result<Self, DeviceError> {
        check("job_length", job_length as f64, job_length >= 1, ">= 1")?;
        check(
            "job_interval",
            job_interval as f64,
            job_interval >= job_length,
            "job_interval >= job_length",
        )?;
        Ok(Self {
            job_length,
            job_interval,
        })
    }

    pub fn job_length(&self) -> u64 {
        self.job_length
    }

    pub fn job_interval(&self) -> u64 {
        self.job_interval
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WasherPolicy {
    pub ewma_lambda: f64,
    /// A job becomes a start candidate when the price is at most
    /// `bargain_factor` times the agent's reference price.
    pub bargain_factor: f64,
    pub voltage_check_enabled: bool,
    pub voltage_limit: f64,
    /// Probability that a candidate start is acted on in a given tick.
    pub act_probability: f64,
}

impl WasherPolicy {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let l = self.ewma_lambda;
        check("ewma_lambda", l, (0.0..=1.0).contains(&l), "0 <= ewma_lambda <= 1")?;
        let b = self.bargain_factor;
        check("bargain_factor", b, b > 0.0 && b.is_finite(), "bargain_factor > 0")?;
        let v = self.voltage_limit;
        check("voltage_limit", v, v > 0.0 && v < 1.0, "0 < voltage_limit < 1")?;
        let p = self.act_probability;
        check(
            "act_probability",
            p,
            (0.0..=1.0).contains(&p),
            "0 <= act_probability <= 1",
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WasherAgent {
    id: usize,
    jobs: WasherJobs,
    reference_price: f64,
    job_pending: bool,
    job_deadline: u64,
    next_release: u64,
    /// First tick after the running job ends.
    running_until: Option<u64>,
}

impl WasherAgent {
    /// A washer holding a pending job at tick 0 whose deadline is `deadline`.
    /// The next job is released `job_length` ticks after that deadline.
    pub fn new(id: usize, jobs: WasherJobs, reference_price: f64, deadline: u64) -> Result<Self, DeviceError> {
        check(
            "reference_price",
            reference_price,
            reference_price > 0.0 && reference_price.is_finite(),
            "reference_price > 0",
        )?;
        Ok(Self {
            id,
            jobs,
            reference_price,
            job_pending: true,
            job_deadline: deadline,
            next_release: deadline + jobs.job_length,
            running_until: None,
        })
    }

    /// A washer whose jobs are released at `offset + k * job_interval`,
    /// observed at tick 0. When the current job is still startable it is
    /// pending; otherwise the agent idles until the release at `offset`.
    pub fn with_offset(id: usize, jobs: WasherJobs, reference_price: f64, offset: u64) -> Result<Self, DeviceError> {
        let mut agent = Self::new(id, jobs, reference_price, offset.saturating_sub(jobs.job_length))?;
        if offset < jobs.job_length {
            agent.job_pending = false;
            agent.next_release = offset;
        }
        Ok(agent)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn reference_price(&self) -> f64 {
        self.reference_price
    }

    pub fn job_pending(&self) -> bool {
        self.job_pending
    }

    pub fn job_length(&self) -> u64 {
        self.jobs.job_length
    }

    pub fn job_deadline(&self) -> u64 {
        self.job_deadline
    }

    pub fn running_until(&self) -> Option<u64> {
        self.running_until
    }

    pub fn is_on(&self) -> bool {
        self.running_until.is_some()
    }

    /// One tick at `tick`, seeing the current market price and the relative
    /// bus voltage of the previous tick.
    pub fn step<R: Rng + ?Sized>(
        &self,
        policy: &WasherPolicy,
        price: f64,
        rel_voltage: f64,
        tick: u64,
        rng: &mut R,
    ) -> Transition<Self> {
        let mut next = self.clone();
        if next.running_until.is_some_and(|end| tick >= end) {
            next.running_until = None;
        }
        if tick >= next.next_release {
            next.job_pending = true;
            next.job_deadline = next.next_release + self.jobs.job_interval - self.jobs.job_length;
            next.next_release += self.jobs.job_interval;
        }

        let mut flags = StepFlags::default();
        let mut start = false;
        if next.job_pending && next.running_until.is_none() {
            if tick >= next.job_deadline {
                start = true;
                flags.forced = true;
            } else {
                let candidate = price <= policy.bargain_factor * next.reference_price;
                let cleared = if policy.voltage_check_enabled {
                    voltage_veto(candidate, rel_voltage, policy.voltage_limit)
                } else {
                    candidate
                };
                flags.vetoed = candidate && !cleared;
                start = randomized_gate(cleared, policy.act_probability, rng);
                flags.withheld = cleared && !start;
            }
        }
        next.reference_price = update_reference_price(next.reference_price, price, policy.ewma_lambda);

        if !start {
            return Transition {
                next,
                on_denied: None,
                flags,
            };
        }
        let denied = next.clone();
        next.job_pending = false;
        next.running_until = Some(tick + self.jobs.job_length);
        Transition {
            next,
            on_denied: Some(denied),
            flags,
        }
    }
}

/// Steps a washer with no central coordination; returns the next state and
/// whether its flexible load is connected.
pub fn washer_step<R: Rng + ?Sized>(
    agent: &WasherAgent,
    policy: &WasherPolicy,
    price: f64,
    rel_voltage: f64,
    tick: u64,
    rng: &mut R,
) -> (WasherAgent, bool) {
    let next = agent.step(policy, price, rel_voltage, tick, rng).commit(true);
    let on = next.is_on();
    (next, on)
}
