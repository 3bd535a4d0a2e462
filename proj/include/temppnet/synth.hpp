#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "temppnet/sensor.hpp"

// Synthetic walking-test corpus with planted class structure: gait slows
// and weakens as symptom severity grows, and severity follows
// class-dependent temporal trajectories (rising for depressed patients,
// falling or flat for the rest).

namespace temppnet {

struct GaitProfile {
  double step_freq_hz = 1.8;
  double stride_amp = 0.30;   // forward oscillation, g units
  double bounce_amp = 0.10;    // vertical oscillation on top of gravity
  double noise_scale = 0.03;
  // severity couplings: frequency and amplitudes shrink as severity rises
  double freq_coupling = 0.35;
  double amp_coupling = 0.5;

  double frequency_at(double severity) const {
    return step_freq_hz * (1.0 - freq_coupling * severity);
  }
  double amplitude_at(double severity) const {
    return stride_amp * (1.0 - amp_coupling * severity);
  }
};

enum class TrajectoryKind { kRise, kRiseWithDips, kFall, kFlatFluctuate };

struct SeverityTrajectory {
  TrajectoryKind kind = TrajectoryKind::kFlatFluctuate;
  double start = 0.1;
  double end = 0.1;
  double dip_depth = 0.0;
  double dip_center_days = 7.0;
  double dip_width_days = 1.5;
  double fluct_amp = 0.0;
  double fluct_period_days = 5.0;
  double fluct_phase = 0.0;
  double noise = 0.0;  // per-test severity jitter

  // clamped to [0,1]; rise kinds end above their start, fall kinds below
  double value(double t_days, double window_days) const;
};

struct GenOptions {
  int n_patients = 200;
  double balance = 0.5;  // depressed share
  std::uint64_t seed = 7;
  int rate_hz = 10;
  double window_days = 14.0;
  int min_tests = 1;
  int max_tests = 8;
  int steps_per_walk = 20;
  double rest_seconds = 30.0;
};

// Class-consistent draws: depressed patients rise (with or without dips),
// the rest fall or fluctuate around a low level.
SeverityTrajectory sample_trajectory(int label, std::mt19937_64& rng);
GaitProfile sample_profile(std::mt19937_64& rng);

WalkingTest synthesize_test(double t_days, double severity, const GaitProfile& profile,
                            const GenOptions& opt, std::mt19937_64& rng);

PatientRecord generate_patient(const std::string& id, int label,
                               const GaitProfile& profile,
                               const SeverityTrajectory& traj, const GenOptions& opt,
                               std::mt19937_64& rng);

// Deterministic given the seed; patient i derives its own rng stream.
Corpus generate_records(const GenOptions& opt);

// Writes the JSONL corpus plus a <path>.manifest.json with the generator
// parameters. Byte-identical across runs with the same options.
void generate_corpus(const GenOptions& opt, const std::string& out_path);

}  // namespace temppnet
