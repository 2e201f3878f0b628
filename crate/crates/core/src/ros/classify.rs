use super::{RosSystemState, SystemNature};

/// Name tokens that mark a simulated robot.
pub const DEFAULT_SIMULATION_MARKERS: &[&str] = &["gazebo", "sim", "stage", "turtlesim"];

fn tokens(name: &str) -> impl Iterator<Item = String> + '_ {
    name.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
}

/// Heuristic nature of a master's graph.
///
/// A graph holding nothing beyond `/rosout` is empty. Otherwise it is a
/// simulation when any node or topic name has a path/underscore-separated
/// token equal to a marker, and real in every other case.
pub fn classify_system(state: &RosSystemState, markers: &[&str]) -> SystemNature {
    if state.nodes.iter().all(|n| n.name == "/rosout") {
        return SystemNature::Empty;
    }
    let names = state
        .nodes
        .iter()
        .map(|n| n.name.as_str())
        .chain(state.topics.iter().map(|t| t.name.as_str()));
    for name in names {
        if tokens(name).any(|t| markers.iter().any(|m| m.eq_ignore_ascii_case(&t))) {
            return SystemNature::Simulation;
        }
    }
    SystemNature::Real
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ros::{RosNode, RosTopic};

    fn state(nodes: &[&str], topics: &[&str]) -> RosSystemState {
        RosSystemState {
            nodes: nodes
                .iter()
                .map(|n| RosNode {
                    name: n.to_string(),
                    uri: String::new(),
                })
                .collect(),
            topics: topics
                .iter()
                .map(|t| RosTopic {
                    name: t.to_string(),
                    msg_type: "std_msgs/String".into(),
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn rosout_only_is_empty() {
        let s = state(&["/rosout"], &["/rosout", "/rosout_agg"]);
        assert_eq!(
            classify_system(&s, DEFAULT_SIMULATION_MARKERS),
            SystemNature::Empty
        );
        assert_eq!(
            classify_system(&RosSystemState::default(), DEFAULT_SIMULATION_MARKERS),
            SystemNature::Empty
        );
    }

    #[test]
    fn gazebo_is_simulation() {
        let s = state(&["/rosout", "/gazebo"], &[]);
        assert_eq!(
            classify_system(&s, DEFAULT_SIMULATION_MARKERS),
            SystemNature::Simulation
        );
        let s = state(&["/rosout", "/driver"], &["/sim_clock"]);
        assert_eq!(
            classify_system(&s, DEFAULT_SIMULATION_MARKERS),
            SystemNature::Simulation
        );
    }

    #[test]
    fn robot_graph_is_real() {
        let s = state(&["/rosout", "/base_controller"], &["/scan", "/simple_goal"]);
        assert_eq!(
            classify_system(&s, DEFAULT_SIMULATION_MARKERS),
            SystemNature::Real
        );
    }

    #[test]
    fn markers_are_configurable() {
        let s = state(&["/rosout", "/webots_ros"], &[]);
        assert_eq!(
            classify_system(&s, DEFAULT_SIMULATION_MARKERS),
            SystemNature::Real
        );
        assert_eq!(classify_system(&s, &["webots"]), SystemNature::Simulation);
    }
}
