#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "skillforge/common/random.h"

namespace skillforge {

struct PidConfig {
  double p = 100.0;   // Nm/rad
  double d = 0.25;    // Nm/rpm
  double rate = 400.0;  // Hz

  void validate() const;
};

// Reference torque of the drive's PD stage. Velocity is given in rad/s and
// converted to rpm for the damping gain.
double pidReferenceTorque(double tauBar, double positionError, double velocity, const PidConfig& config);

// Synthetic series-elastic drive used as ground truth. The output torque is a
// second-order lag of the saturated reference torque minus Coulomb friction,
// discretized exactly under zero-order hold.
struct DriveParams {
  double naturalFrequency = 50.0;  // rad/s
  double damping = 0.6;
  double torqueLimit = 40.0;       // Nm
  double coulombFriction = 1.0;    // Nm
  double torqueConstant = 2.0;     // Nm/A
  double idleCurrent = 0.5;        // A
  double rate = 400.0;             // Hz

  // Throws InvalidInput for damping <= 0, frequency <= 0 or an aliased frequency.
  void validate() const;
};

// Time for the step response to stay within 2% of its final value, from the
// exponential envelope of an underdamped second-order system.
double settlingTime(const DriveParams& drive);

struct ActuatorSequence {
  std::string name;
  Eigen::VectorXd t;
  Eigen::VectorXd tauBar;
  Eigen::VectorXd eps;
  Eigen::VectorXd qdot;
  Eigen::VectorXd temperature;
  Eigen::VectorXd voltage;
  Eigen::VectorXd tau;
  Eigen::VectorXd current;

  Eigen::Index size() const {
    return t.size();
  }
  // Throws InvalidInput unless all columns have equal length and are finite.
  void validate() const;
};

// Ground-truth torque and current for given commands. Sequence fields tau and
// current are overwritten.
void simulateDrive(const DriveParams& drive, const PidConfig& pid, ActuatorSequence& seq);

struct CommandSchedule {
  double duration = 20.0;          // s
  double segmentMean = 0.25;       // s, mean hold time of the feed-forward torque
  double torqueAmplitude = 15.0;   // Nm
  double errorAmplitude = 0.05;    // rad
  double velocityAmplitude = 3.0;  // rad/s
  double minFrequency = 0.2;       // Hz
  double maxFrequency = 2.0;       // Hz
  double temperatureLow = 30.0;    // C
  double temperatureHigh = 50.0;
  double voltageLow = 46.0;        // V
  double voltageHigh = 50.0;
};

ActuatorSequence generateSequence(
    const DriveParams& drive,
    const PidConfig& pid,
    const CommandSchedule& schedule,
    const std::string& name,
    Rng& rng);

struct ActuatorDataset {
  std::vector<ActuatorSequence> sequences;
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;

  void validate() const;
};

// One sequence per actuator, split 10:1:1 for 12 actuators.
ActuatorDataset generateDataset(
    const DriveParams& drive,
    const PidConfig& pid,
    const CommandSchedule& schedule,
    int actuators,
    uint64_t seed);

// Writes <dir>/<name>.csv per sequence plus <dir>/split.json.
void saveActuatorDataset(const ActuatorDataset& data, const std::string& dir);
ActuatorDataset loadActuatorDataset(const std::string& dir);

// Delayed first-order hold: sample k of the input is reached one input period
// after it is issued, ramping linearly from the previous sample. `initial` is
// the value held before the first sample.
Eigen::VectorXd fohInterpolate(const Eigen::VectorXd& setpoints, double inRate, double outRate, double initial);

}  // namespace skillforge
