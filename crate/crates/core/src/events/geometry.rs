use serde::{Deserialize, Serialize};

pub const GOAL_WIDTH: f64 = 7.32;
pub const GOAL_HEIGHT: f64 = 2.44;

/// Pitch frame: where the centre of the goal mouth sits and how wide it is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pitch {
    pub goal_x: f64,
    pub goal_y: f64,
    pub goal_width: f64,
}

impl Default for Pitch {
    /// 120 x 80 pitch with the attacked goal on the right touchline.
    fn default() -> Self {
        Pitch {
            goal_x: 120.0,
            goal_y: 40.0,
            goal_width: GOAL_WIDTH,
        }
    }
}

impl Pitch {
    pub fn centered_at(goal_x: f64, goal_y: f64) -> Self {
        Pitch {
            goal_x,
            goal_y,
            ..Pitch::default()
        }
    }
}

/// Distance to the goal centre and the angle (radians) subtended by the two
/// posts at the shot location.
///
/// The angle lies in `[0, π]`. A shot on the goal line between the posts
/// gets exactly `π`; one on the goal line outside the frame gets `0`.
pub fn engineer_geometry(x: f64, y: f64, pitch: &Pitch) -> (f64, f64) {
    let dx = pitch.goal_x - x;
    let dy = pitch.goal_y - y;
    let dist = dx.hypot(dy);
    let half = pitch.goal_width / 2.0;
    // vectors from the shot to each post
    let (ax, ay) = (dx, dy - half);
    let (bx, by) = (dx, dy + half);
    let cross = ax * by - ay * bx;
    let dot = ax * bx + ay * by;
    let angle = if dx.abs() <= 1e-12 {
        // on the goal line: inside the frame sees the full half-plane
        if dy.abs() < half - 1e-9 {
            std::f64::consts::PI
        } else {
            0.0
        }
    } else {
        cross.abs().atan2(dot)
    };
    (dist, angle)
}

/// Goal frame for deciding whether a shot's end location is on target.
/// End locations are offsets from the goal centre: `end_y` across, `end_z` up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalFrame {
    pub width: f64,
    pub height: f64,
}

impl Default for GoalFrame {
    fn default() -> Self {
        GoalFrame {
            width: GOAL_WIDTH,
            height: GOAL_HEIGHT,
        }
    }
}

pub fn derive_on_target(end_y: f64, end_z: f64, frame: &GoalFrame) -> bool {
    end_y.abs() <= frame.width / 2.0 && (0.0..=frame.height).contains(&end_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn penalty_spot_distance_and_angle() {
        let p = Pitch::default();
        let (d, a) = engineer_geometry(109.0, 40.0, &p);
        assert_abs_diff_eq!(d, 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a, 2.0 * (3.66f64 / 11.0).atan(), epsilon = 1e-12);
        assert_abs_diff_eq!(a, 0.6424, epsilon = 1e-4);
    }

    #[test]
    fn goal_line_limits() {
        let p = Pitch::default();
        let (_, inside) = engineer_geometry(120.0, 41.0, &p);
        assert_eq!(inside, std::f64::consts::PI);
        let (_, at_post) = engineer_geometry(120.0, 40.0 + 3.66, &p);
        assert_eq!(at_post, 0.0);
        let (_, outside) = engineer_geometry(120.0, 50.0, &p);
        assert_abs_diff_eq!(outside, 0.0, epsilon = 1e-15);
        // approaching the post along the goal line from outside tends to 0
        let (_, near) = engineer_geometry(119.999_999, 40.0 + 3.661, &p);
        assert!(near < 1e-2);
    }

    #[test]
    fn on_target_frame() {
        let f = GoalFrame::default();
        assert!(derive_on_target(3.66, 2.44, &f));
        assert!(!derive_on_target(3.67, 1.0, &f));
        assert!(!derive_on_target(0.0, -0.1, &f));
    }

    proptest! {
        #[test]
        fn symmetric_about_centre_line(x in 60.0f64..119.9, off in 0.0f64..40.0) {
            let p = Pitch::centered_at(120.0, 0.0);
            let (d1, a1) = engineer_geometry(x, off, &p);
            let (d2, a2) = engineer_geometry(x, -off, &p);
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!((a1 - a2).abs() < 1e-12);
            prop_assert!(a1 >= 0.0 && a1 <= std::f64::consts::PI);
        }
    }
}
