use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityParams {
    pub arena_width: f64,
    pub arena_height: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Seconds between redraws of speed and heading.
    pub redraw_period: f64,
    /// Position update step.
    pub tick: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            arena_width: 500.0,
            arena_height: 500.0,
            speed_min: 2.0,
            speed_max: 10.0,
            redraw_period: 10.0,
            tick: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn dist(self, o: Position) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mover {
    pub pos: Position,
    pub speed: f64,
    pub heading: f64,
    pub mobile: bool,
}

/// Random-direction mobility in a walled arena.
#[derive(Debug, Clone)]
pub struct MobilityState {
    pub params: MobilityParams,
    pub movers: Vec<Mover>,
    since_redraw: f64,
}

impl MobilityState {
    pub fn new(params: MobilityParams, movers: Vec<Mover>) -> Self {
        Self {
            params,
            movers,
            since_redraw: 0.0,
        }
    }

    /// Places a mobile node uniformly in the arena with a fresh velocity.
    pub fn random_mover(params: &MobilityParams, rng: &mut ChaCha8Rng) -> Mover {
        let pos = Position {
            x: rng.gen_range(0.0..=params.arena_width),
            y: rng.gen_range(0.0..=params.arena_height),
        };
        let mut m = Mover {
            pos,
            speed: 0.0,
            heading: 0.0,
            mobile: true,
        };
        redraw(params, &mut m, rng);
        m
    }

    pub fn position(&self, i: usize) -> Position {
        self.movers[i].pos
    }

    /// Advances every mobile node by `dt` seconds.
    pub fn step(&mut self, dt: f64, rng: &mut ChaCha8Rng) {
        assert!(dt > 0.0, "mobility step must be positive");
        let (w, h) = (self.params.arena_width, self.params.arena_height);
        for m in self.movers.iter_mut().filter(|m| m.mobile) {
            m.pos.x += m.speed * m.heading.cos() * dt;
            m.pos.y += m.speed * m.heading.sin() * dt;
            if m.pos.x < 0.0 || m.pos.x > w {
                m.pos.x = reflect(m.pos.x, w);
                m.heading = PI - m.heading;
            }
            if m.pos.y < 0.0 || m.pos.y > h {
                m.pos.y = reflect(m.pos.y, h);
                m.heading = -m.heading;
            }
            m.heading = m.heading.rem_euclid(2.0 * PI);
        }
        self.since_redraw += dt;
        if self.since_redraw + 1e-9 >= self.params.redraw_period {
            self.since_redraw = 0.0;
            for m in self.movers.iter_mut().filter(|m| m.mobile) {
                redraw(&self.params, m, rng);
            }
        }
    }
}

fn redraw(p: &MobilityParams, m: &mut Mover, rng: &mut ChaCha8Rng) {
    m.speed = if p.speed_max > p.speed_min {
        rng.gen_range(p.speed_min..=p.speed_max)
    } else {
        p.speed_min
    };
    m.heading = rng.gen_range(0.0..2.0 * PI);
}

fn reflect(v: f64, max: f64) -> f64 {
    let r = if v < 0.0 { -v } else { 2.0 * max - v };
    r.clamp(0.0, max)
}
