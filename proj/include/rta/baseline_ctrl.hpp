#pragma once

// Classical primary controllers (translational LQR, attitude PD), scripted
// policies, and a line-delimited JSON bridge to an external policy process.

#include <Eigen/Dense>
#include <json.hpp>

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "rta/errors.hpp"
#include "rta/quat_dyn.hpp"
#include "rta/thermal_power.hpp"
#include "rta/trace.hpp"

namespace rta {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

struct LqrParams {
  Mat6 Q = (Vec6() << 1e-4, 1e-4, 1e-4, 1.0, 1.0, 1.0).finished().asDiagonal();
  Mat3 R = 1e2 * Mat3::Identity();
  Vec3 target_p = Vec3::Zero();
  Vec3 target_v = Vec3::Zero();
};

struct PdParams {
  double kp = 0.02;
  double kd = 0.2;
  Quaternion target_q;
  // When set, the target is recomputed every call to point this body axis at the Sun.
  std::optional<Vec3> sun_axis;
};

// Clohessy-Wiltshire state matrix, state [p; v], force input in N.
inline Mat6 cw_a_matrix(double n) {
  Mat6 a = Mat6::Zero();
  a.topRightCorner<3, 3>() = Mat3::Identity();
  a(3, 0) = 3.0 * n * n;
  a(3, 4) = 2.0 * n;
  a(4, 3) = -2.0 * n;
  a(5, 2) = -n * n;
  return a;
}

inline Mat63 cw_b_matrix(double mass) {
  Mat63 b = Mat63::Zero();
  b.bottomRows<3>() = Mat3::Identity() / mass;
  return b;
}

struct LqrSolution {
  Mat36 K;
  Mat6 P;
  int iterations = 0;
};

inline Mat6 care_residual(const Mat6& A, const Mat63& B, const Mat6& Q, const Mat3& R,
                          const Mat6& P) {
  return A.transpose() * P + P * A - P * B * R.ldlt().solve(B.transpose() * P) + Q;
}

// Solves X A + A^T X = -C for symmetric C via the Kronecker form.
inline Mat6 solve_lyapunov(const Mat6& A, const Mat6& C) {
  using Big = Eigen::Matrix<double, 36, 36>;
  const Mat6 I = Mat6::Identity();
  Big L;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      L.block<6, 6>(6 * i, 6 * j) = A(j, i) * I;
      if (i == j) L.block<6, 6>(6 * i, 6 * j) += A.transpose();
    }
  }
  Eigen::Matrix<double, 36, 1> c = -Eigen::Map<const Eigen::Matrix<double, 36, 1>>(C.data());
  const Eigen::Matrix<double, 36, 1> x = L.partialPivLu().solve(c);
  Mat6 X = Eigen::Map<const Mat6>(x.data());
  return 0.5 * (X + X.transpose());
}

// Kleinman iteration from a stabilizing PD-like seed.
inline LqrSolution solve_lqr(const Mat6& A, const Mat63& B, const Mat6& Q, const Mat3& R,
                             const Mat36& K0, int max_iter = 100, double tol = 1e-13) {
  if (!Q.allFinite() || !R.allFinite()) throw RiccatiDivergence("lqr: non-finite weights");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()) ||
      Eigen::SelfAdjointEigenSolver<Mat6>(Q).eigenvalues().minCoeff() < -1e-12) {
    throw RiccatiDivergence("lqr: Q must be symmetric positive semidefinite");
  }
  if (Eigen::SelfAdjointEigenSolver<Mat3>(R).eigenvalues().minCoeff() <= 0.0) {
    throw RiccatiDivergence("lqr: R must be positive definite");
  }
  LqrSolution sol;
  sol.K = K0;
  for (int it = 1; it <= max_iter; ++it) {
    const Mat6 Ak = A - B * sol.K;
    if (Eigen::EigenSolver<Mat6>(Ak).eigenvalues().real().maxCoeff() >= 0.0) {
      throw RiccatiDivergence("lqr: iterate lost closed-loop stability");
    }
    sol.P = solve_lyapunov(Ak, Q + sol.K.transpose() * R * sol.K);
    const Mat36 K_next = R.ldlt().solve(B.transpose() * sol.P);
    if (!K_next.allFinite()) throw RiccatiDivergence("lqr: non-finite gain");
    const double change = (K_next - sol.K).cwiseAbs().maxCoeff();
    sol.K = K_next;
    sol.iterations = it;
    if (change <= tol * (1.0 + sol.K.cwiseAbs().maxCoeff())) return sol;
  }
  throw RiccatiDivergence("lqr: Kleinman iteration did not converge");
}

inline Mat36 lqr_gain(const LqrParams& params, const VehicleParams& vp = {}) {
  const Mat6 A = cw_a_matrix(vp.mean_motion);
  const Mat63 B = cw_b_matrix(vp.mass);
  // Cancels the CW coupling and adds a stable double-integrator loop.
  Mat36 K0;
  K0.leftCols<3>() = vp.mass * (A.bottomLeftCorner<3, 3>() + 0.01 * Mat3::Identity());
  K0.rightCols<3>() = vp.mass * (A.bottomRightCorner<3, 3>() + 0.2 * Mat3::Identity());
  return solve_lqr(A, B, params.Q, params.R, K0).K;
}

// Hill-frame LQR force, rotated into the body frame and clamped to the box.
inline Vec3 lqr_force(const SimState& s, const Mat36& K, const LqrParams& params,
                      const VehicleParams& vp) {
  Vec6 err;
  err << s.p - params.target_p, s.v - params.target_v;
  const Vec3 f_hill = -K * err;
  const Vec3 f_body = quat_rotate(s.q.conjugate(), f_hill);
  return f_body.cwiseMax(-vp.thrust_max).cwiseMin(vp.thrust_max);
}

inline Vec3 pd_attitude(const SimState& s, const PdParams& params, const VehicleParams& vp = {}) {
  Quaternion e = params.target_q.conjugate() * s.q;
  if (e.s < 0.0) e = Quaternion(-e.v, -e.s);
  const Vec3 tau = -params.kp * e.v - params.kd * s.omega;
  return tau.cwiseMax(-vp.torque_max).cwiseMin(vp.torque_max);
}

// Attitude that points a body axis along a Hill-frame direction.
inline Quaternion pointing_quaternion(const Vec3& body_axis, const Vec3& hill_dir) {
  const Vec3 a = body_axis.normalized();
  const Vec3 b = hill_dir.normalized();
  const double c = a.dot(b);
  if (c < -1.0 + 1e-12) {
    Vec3 axis = a.cross(Vec3::UnitX());
    if (axis.norm() < 1e-6) axis = a.cross(Vec3::UnitY());
    return Quaternion::from_axis_angle(axis.normalized(), std::numbers::pi);
  }
  // Half-way quaternion: scalar 1 + c, vector a x b, then normalized.
  Quaternion q(a.cross(b), 1.0 + c);
  return q.normalized();
}

// ---------------------------------------------------------------------------
// Policies act once per policy period on the state and its observation.

class Policy {
 public:
  virtual ~Policy() = default;
  virtual ControlInput act(const SimState& s, const Observation& obs) = 0;
  virtual std::string name() const = 0;
};

class ZeroPolicy final : public Policy {
 public:
  ControlInput act(const SimState&, const Observation&) override { return {}; }
  std::string name() const override { return "zero"; }
};

class RandomPolicy final : public Policy {
 public:
  RandomPolicy(std::uint64_t seed, VehicleParams vp) : rng_(seed), vp_(vp) {}
  ControlInput act(const SimState&, const Observation&) override {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ControlInput c;
    for (int k = 0; k < 3; ++k) c.force[k] = vp_.thrust_max * u(rng_);
    for (int k = 0; k < 3; ++k) c.torque[k] = vp_.torque_max * u(rng_);
    return c;
  }
  std::string name() const override { return "random"; }

 private:
  std::mt19937_64 rng_;
  VehicleParams vp_;
};

class LqrPdPolicy final : public Policy {
 public:
  LqrPdPolicy(LqrParams lqr, PdParams pd, VehicleParams vp)
      : lqr_(std::move(lqr)), pd_(pd), vp_(vp), K_(lqr_gain(lqr_, vp)) {}
  ControlInput act(const SimState& s, const Observation&) override {
    PdParams pd = pd_;
    if (pd.sun_axis) pd.target_q = pointing_quaternion(*pd.sun_axis, sun_vector(s.theta_sun));
    return {lqr_force(s, K_, lqr_, vp_), pd_attitude(s, pd, vp_)};
  }
  std::string name() const override { return "lqr-pd"; }
  const Mat36& gain() const { return K_; }

 private:
  LqrParams lqr_;
  PdParams pd_;
  VehicleParams vp_;
  Mat36 K_;
};

// ---------------------------------------------------------------------------
// External policy over a child's stdin/stdout. After a handshake line each
// observation record is answered by exactly one action record.

inline constexpr int kBridgeVersion = 1;

inline nlohmann::json observation_record(double t, const Observation& obs) {
  return {{"t", t}, {"obs", obs}};
}

inline Observation parse_observation_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  const auto v = j.at("obs").get<std::vector<double>>();
  if (v.size() != kObsSize) throw MalformedAction("observation record has wrong length");
  Observation o{};
  std::copy(v.begin(), v.end(), o.begin());
  return o;
}

inline ControlInput parse_action_record(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedAction(std::string("action is not JSON: ") + e.what());
  }
  auto triple = [&](const char* key) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
      throw MalformedAction(std::string("action needs a 3-element '") + key + "' array");
    }
    Vec3 out;
    for (int k = 0; k < 3; ++k) {
      if (!j[key][k].is_number()) throw MalformedAction(std::string("non-numeric '") + key + "'");
      out[k] = j[key][k].get<double>();
    }
    if (!out.allFinite()) throw MalformedAction(std::string("non-finite '") + key + "'");
    return out;
  };
  return {triple("F"), triple("tau")};
}

class PolicyBridge {
 public:
  explicit PolicyBridge(std::string command, double timeout_s = 5.0)
      : command_(std::move(command)), timeout_ms_(static_cast<int>(timeout_s * 1000.0)) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw Error("bridge: pipe failed");
    pid_ = fork();
    if (pid_ < 0) throw Error("bridge: fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    signal(SIGPIPE, SIG_IGN);

    send({{"v", kBridgeVersion}, {"obs_size", kObsSize}});
    const std::string ack = read_line();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ack);
    } catch (const nlohmann::json::exception&) {
      throw MalformedAction("bridge handshake is not JSON: " + ack);
    }
    if (!j.is_object() || j.value("v", -1) != kBridgeVersion) {
      throw MalformedAction("bridge handshake version mismatch: " + ack);
    }
  }

  PolicyBridge(const PolicyBridge&) = delete;
  PolicyBridge& operator=(const PolicyBridge&) = delete;

  ~PolicyBridge() {
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      for (int k = 0; k < 50; ++k) {
        if (waitpid(pid_, &status, WNOHANG) != 0) return;
        usleep(2000);
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
    }
  }

  ControlInput request(double t, const Observation& obs) {
    send(observation_record(t, obs));
    return parse_action_record(read_line());
  }

 private:
  void send(const nlohmann::json& j) {
    const std::string line = j.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t w = write(write_fd_, line.data() + off, line.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw MalformedAction("bridge: policy process closed its input");
      }
      off += static_cast<std::size_t>(w);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
    while (true) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
      if (left <= 0) throw BridgeTimeout("bridge: no reply within timeout");
      pollfd p{read_fd_, POLLIN, 0};
      const int r = poll(&p, 1, static_cast<int>(left));
      if (r < 0 && errno == EINTR) continue;
      if (r == 0) throw BridgeTimeout("bridge: no reply within timeout");
      char chunk[4096];
      const ssize_t n = read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw MalformedAction("bridge: policy process exited");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  int timeout_ms_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

class ExternalPolicy final : public Policy {
 public:
  explicit ExternalPolicy(const std::string& command, double timeout_s = 5.0)
      : bridge_(command, timeout_s) {}
  ControlInput act(const SimState& s, const Observation& obs) override {
    return bridge_.request(s.t, obs);
  }
  std::string name() const override { return "external"; }

 private:
  PolicyBridge bridge_;
};

}  // namespace rta
