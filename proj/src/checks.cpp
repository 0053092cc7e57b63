#include "dynamap/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "dynamap/common.hpp"
#include "dynamap/dstorm.hpp"
#include "dynamap/gdsp.hpp"
#include "dynamap/oracle.hpp"

namespace dynamap::checks {

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
}

CameraModel test_camera() {
  CameraModel cam;
  cam.fov_h = 90.0 * M_PI / 180.0;
  cam.fov_v = 70.0 * M_PI / 180.0;
  cam.pyramid_res = 3.0 * M_PI / 180.0;
  cam.max_range = 5.0;
  cam.rows = 60;
  cam.cols = 80;
  return cam;
}

std::string format(const char* fmt, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

}  // namespace

CheckResult check_filter_oracle(int instances, uint64_t seed) {
  CheckResult out;
  out.name = "filter update vs sequential oracle";
  out.cases = instances;
  const CameraModel cam = test_camera();
  const MapExtents extents = MapExtents::create(Vec3(-1.5, -1.5, 0.0), 3.0, 3.0, 3.0, 0.1);

  double worst = 0;
  for (int inst = 0; inst < instances; ++inst) {
    auto rng = make_rng(seed, "filter-check", inst);
    std::uniform_int_distribution<int> lsize(1, 500);
    std::uniform_int_distribution<int> msize(0, 200);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int lf = lsize(rng);
    const int m = msize(rng);
    MapParams params;
    params.extents = extents;
    params.l_max = lf;
    params.detection = 0.5 + 0.49 * unit(rng);
    params.clutter = 1e-6 + unit(rng);
    params.sigma_obs = 0.01 + 0.19 * unit(rng);
    params.birth_weight = 0.01 + 0.49 * unit(rng);
    params.occlusion_thickness = 0.5 * unit(rng);

    ParticlePool pool(lf);
    pool.count = lf;
    std::vector<double> w0(lf);
    for (int i = 0; i < lf; ++i) {
      Particle& pt = pool.slots[i];
      pt.p = Vec3(-1.0 + 2.0 * unit(rng), -1.0 + 2.0 * unit(rng), 0.3 + 2.7 * unit(rng));
      pt.v = Vec3(i, 0, 0);  // tags the slot so the oracle can find its pre-weight
      pt.w = 1e-4 + unit(rng);
      pt.id_v = params.extents.voxel_index(pt.p);
      pt.id_p[0] = cam.pyramid_index(pt.p);
      pt.valid = true;
      w0[i] = pt.w;
    }

    PointCloud cloud;
    cloud.frame = Frame::world;
    for (int i = 0; i < m; ++i)
      cloud.points.emplace_back(-0.8 + 1.6 * unit(rng), -0.8 + 1.6 * unit(rng),
                                0.5 + 2.0 * unit(rng));

    UpdateResult ur = update_weights(pool, cloud, cam, params);

    std::vector<Vec3> positions(lf);
    Eigen::VectorXd weights(lf);
    std::vector<char> observable(lf);
    for (int j = 0; j < lf; ++j) {
      const Particle& pt = pool.slots[j];
      positions[j] = pt.p;
      weights[j] = w0[static_cast<int>(std::lround(pt.v.x()))];
      observable[j] = pt.observable ? 1 : 0;
    }
    PhdOracleParams op;
    op.detection = params.detection;
    op.sigma_obs = params.sigma_obs;
    op.clutter = params.clutter;
    op.birth_weight = params.birth_weight;
    op.newborn_count = m;
    PhdOracleResult oracle = sequential_phd_update(positions, weights, observable,
                                                   cloud.points, op);

    for (int j = 0; j < lf; ++j)
      worst = std::max(worst, rel_err(pool.slots[j].w, oracle.weights[j]));
    for (int i = 0; i < m; ++i)
      worst = std::max(worst, rel_err(ur.denominators[i], oracle.denominators[i]));
  }
  out.worst = worst;
  out.pass = worst <= 1e-9;
  out.detail = format("max rel err %.3g (tol 1e-9)", worst);
  return out;
}

CheckResult check_covariance_oracle(int instances, int horizon, uint64_t seed) {
  CheckResult out;
  out.name = "closed-form covariance vs recursive oracle";
  out.cases = instances;
  double worst = 0;
  for (int inst = 0; inst < instances; ++inst) {
    auto rng = make_rng(seed, "cov-check", inst);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> step(0.005, 0.1);
    Mat3 ap, av;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        ap(r, c) = gauss(rng);
        av(r, c) = gauss(rng);
      }
    Mat3 sigma_p = ap * ap.transpose() + 0.1 * Mat3::Identity();
    Mat3 sigma_v = av * av.transpose() + 0.1 * Mat3::Identity();
    Mat6 sigma0 = Mat6::Zero();
    sigma0.topLeftCorner<3, 3>() = sigma_p;
    sigma0.bottomRightCorner<3, 3>() = sigma_v;
    Eigen::VectorXd dt(horizon);
    for (int h = 0; h < horizon; ++h) dt[h] = step(rng);

    std::vector<Mat3> closed = propagate_obstacle_covariance(sigma_p, sigma_v, dt);
    std::vector<Mat6> recursive = recursive_ekf_covariance(sigma0, dt, Mat6::Zero());
    for (int h = 0; h < horizon; ++h) {
      Mat3 ref = recursive[h].topLeftCorner<3, 3>();
      double err = (closed[h] - ref).norm() / std::max(ref.norm(), 1e-30);
      worst = std::max(worst, err);
      Mat3 vel = recursive[h].bottomRightCorner<3, 3>();
      worst = std::max(worst, (vel - sigma_v).norm() / sigma_v.norm());
    }
  }
  out.worst = worst;
  out.pass = worst <= 1e-10;
  out.detail = format("max rel err %.3g (tol 1e-10)", worst);
  return out;
}

CheckResult check_assignment_oracle(int pools, uint64_t seed) {
  CheckResult out;
  out.name = "grouping and Hungarian vs brute force";
  out.cases = pools;
  const CameraModel cam = test_camera();
  const MapExtents extents = MapExtents::create(Vec3(-1.5, -1.5, 0.0), 3.0, 3.0, 3.0, 0.3);
  bool ok = true;
  std::string why;

  for (int inst = 0; inst < pools && ok; ++inst) {
    auto rng = make_rng(seed, "group-check", inst);
    std::uniform_int_distribution<int> lsize(50, 400);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int lf = lsize(rng);

    ParticlePool pool(lf);
    pool.count = lf;
    for (int i = 0; i < lf; ++i) {
      Particle& pt = pool.slots[i];
      // Spread beyond the FOV and the extents so both sorts see negative keys.
      pt.p = Vec3(-2.0 + 4.0 * unit(rng), -2.0 + 4.0 * unit(rng), -0.5 + 4.0 * unit(rng));
      pt.v = Vec3(i, 0, 0);
      pt.w = unit(rng);
      pt.id_v = extents.voxel_index(pt.p);
      pt.id_p[0] = cam.pyramid_index(pt.p);
      pt.valid = true;
    }

    auto tag = [](const Particle& pt) { return static_cast<int>(std::lround(pt.v.x())); };
    auto verify_sort = [&](const ParticlePool& sorted, auto key_of,
                           const char* label) {
      if (sorted.count != lf) {
        ok = false;
        why = std::string(label) + ": particle count changed";
        return;
      }
      std::vector<char> seen(lf, 0);
      int prev_key = std::numeric_limits<int>::min();
      int prev_tag = -1;
      bool in_negatives = false;
      for (int k = 0; k < sorted.count; ++k) {
        const Particle& pt = sorted.slots[k];
        int t = tag(pt);
        if (t < 0 || t >= lf || seen[t]) {
          ok = false;
          why = std::string(label) + ": not a permutation";
          return;
        }
        seen[t] = 1;
        int id = key_of(pt);
        if (id < 0) {
          in_negatives = true;
        } else if (in_negatives) {
          ok = false;
          why = std::string(label) + ": non-negative key after the negative block";
          return;
        } else if (id < prev_key) {
          ok = false;
          why = std::string(label) + ": keys not sorted";
          return;
        } else if (id == prev_key && t < prev_tag) {
          ok = false;
          why = std::string(label) + ": equal-key order not stable";
          return;
        }
        prev_key = id < 0 ? prev_key : id;
        prev_tag = id < 0 ? prev_tag : t;
      }
    };

    {
      ParticlePool copy = pool;
      PyramidTable table = assign_particles_to_pyramids(copy, cam, 0);
      verify_sort(copy, [](const Particle& pt) { return pt.id_p[0]; }, "pyramid sort");
      if (!ok) break;
      std::map<int, int> counts;
      for (int i = 0; i < lf; ++i)
        if (pool.slots[i].id_p[0] >= 0) ++counts[pool.slots[i].id_p[0]];
      for (int id = 0; id < cam.pyramid_count(); ++id) {
        const PyramidRange& cell = table.cells[id];
        int expect = counts.count(id) ? counts[id] : 0;
        if (cell.count != expect ||
            (expect > 0 && cell.last - cell.first + 1 != expect)) {
          ok = false;
          why = "pyramid group-by count mismatch";
          break;
        }
        for (int k = cell.first; expect > 0 && k <= cell.last; ++k)
          if (copy.slots[k].id_p[0] != id) {
            ok = false;
            why = "pyramid range covers a foreign id";
            break;
          }
        if (!ok) break;
      }
      if (!ok) break;
    }

    {
      ParticlePool copy = pool;
      MapParams params;
      params.extents = extents;
      params.l_max = lf;
      params.occ_threshold = 0.0;
      std::vector<VoxelEstimate> est = estimate_voxels(copy, params);
      verify_sort(copy, [](const Particle& pt) { return pt.id_v; }, "voxel sort");
      if (!ok) break;
      std::map<int, double> sums;
      for (int i = 0; i < lf; ++i)
        if (pool.slots[i].id_v >= 0) sums[pool.slots[i].id_v] += pool.slots[i].w;
      if (est.size() != sums.size()) {
        ok = false;
        why = "voxel group-by emitted a different cell set";
        break;
      }
      size_t j = 0;
      for (const auto& [id, w] : sums) {
        if (est[j].voxel != id || rel_err(est[j].occupancy, w) > 1e-9) {
          ok = false;
          why = "voxel weight sum mismatch";
          break;
        }
        ++j;
      }
      if (!ok) break;
    }
  }

  for (int t = 0; t < 200 && ok; ++t) {
    auto rng = make_rng(seed, "hungarian-check", t);
    std::uniform_int_distribution<int> dim(1, 6);
    std::uniform_real_distribution<double> val(-5.0, 10.0);
    const int n = dim(rng), m = dim(rng);
    Eigen::MatrixXd cost(n, m);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < m; ++c) cost(r, c) = val(rng);
    AssignmentResult prod = hungarian(cost);
    AssignmentResult oracle = brute_force_assignment(cost);
    if (std::abs(prod.cost - oracle.cost) >
        1e-9 * std::max(1.0, std::abs(oracle.cost))) {
      ok = false;
      why = format("Hungarian cost %.12g != enumeration %.12g", prod.cost, oracle.cost);
      break;
    }
    std::vector<char> used(m, 0);
    double recost = 0;
    int assigned = 0;
    for (int r = 0; r < n; ++r) {
      int c = prod.row_to_col[r];
      if (c < 0) continue;
      if (c >= m || used[c]) {
        ok = false;
        why = "Hungarian assignment reuses a column";
        break;
      }
      used[c] = 1;
      recost += cost(r, c);
      ++assigned;
    }
    if (ok && (assigned != std::min(n, m) ||
               std::abs(recost - prod.cost) > 1e-9 * std::max(1.0, std::abs(recost)))) {
      ok = false;
      why = "Hungarian assignment inconsistent with its reported cost";
    }
  }

  out.pass = ok;
  out.detail = ok ? "group-by counts, order, and matchings all agree" : why;
  return out;
}

CheckResult check_kinematics(int samples, uint64_t seed) {
  CheckResult out;
  out.name = "Jacobian finite differences and FK oracles";
  out.cases = samples;
  double worst_fd = 0, worst_fk = 0;
  const double h = 1e-6;

  for (const RobotModel& model : {RobotModel::planar3(), RobotModel::ur5()}) {
    for (int s = 0; s < samples; ++s) {
      auto rng = make_rng(seed, "kin-check", s * 2 + (model.dof() == 6));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      Eigen::VectorXd q(model.dof());
      for (int i = 0; i < model.dof(); ++i)
        q[i] = model.q_min[i] + (model.q_max[i] - model.q_min[i]) * unit(rng);

      Eigen::MatrixXd J = jacobian(model, q);
      for (int i = 0; i < model.dof(); ++i) {
        Eigen::VectorXd qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        FkResult fp = forward_kinematics(model, qp);
        FkResult fm = forward_kinematics(model, qm);
        Vec3 dp = (fp.ee.t - fm.ee.t) / (2 * h);
        Eigen::AngleAxisd aa(fp.ee.R * fm.ee.R.transpose());
        Vec3 dw = aa.angle() * aa.axis() / (2 * h);
        worst_fd = std::max(worst_fd, (J.block<3, 1>(0, i) - dp).cwiseAbs().maxCoeff());
        worst_fd = std::max(worst_fd, (J.block<3, 1>(3, i) - dw).cwiseAbs().maxCoeff());
      }

      FkResult fk = forward_kinematics(model, q);
      Eigen::Matrix4d oracle = Eigen::Matrix4d::Identity();
      if (model.dof() == 3) {
        const double lens[3] = {0.40, 0.35, 0.25};
        double angle = 0, x = 0, y = 0;
        for (int i = 0; i < 3; ++i) {
          angle += q[i];
          x += lens[i] * std::cos(angle);
          y += lens[i] * std::sin(angle);
        }
        oracle.topLeftCorner<3, 3>() =
            Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
        oracle(0, 3) = x;
        oracle(1, 3) = y;
      } else {
        const double d[6] = {0.089159, 0, 0, 0.10915, 0.09465, 0.0823};
        const double a[6] = {0, -0.425, -0.39225, 0, 0, 0};
        const double alpha[6] = {M_PI / 2, 0, 0, M_PI / 2, -M_PI / 2, 0};
        for (int i = 0; i < 6; ++i) {
          const double ct = std::cos(q[i]), st = std::sin(q[i]);
          const double ca = std::cos(alpha[i]), sa = std::sin(alpha[i]);
          Eigen::Matrix4d A;
          A << ct, -st * ca, st * sa, a[i] * ct,
               st, ct * ca, -ct * sa, a[i] * st,
               0, sa, ca, d[i],
               0, 0, 0, 1;
          oracle = oracle * A;
        }
      }
      worst_fk = std::max(worst_fk, (fk.ee.matrix() - oracle).cwiseAbs().maxCoeff());
    }
  }
  out.worst = std::max(worst_fd, worst_fk);
  out.pass = worst_fd <= 1e-5 && worst_fk <= 1e-10;
  out.detail = format("FD err %.3g (tol 1e-5), FK err %.3g (tol 1e-10)", worst_fd,
                      worst_fk);
  return out;
}

CheckResult check_planner_invariants(uint64_t seed) {
  CheckResult out;
  out.name = "planner invariants";
  bool ok = true;
  std::string why;
  auto rng = make_rng(seed, "planner-check");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int t = 0; t < 100 && ok; ++t) {
    const int K = 2 + t % 63;
    Eigen::VectorXd cost(K);
    for (int k = 0; k < K; ++k) cost[k] = 200.0 * unit(rng) - 50.0;
    double beta = 0.1 + 5.0 * unit(rng);
    Eigen::VectorXd eta = trajectory_weights(cost, beta);
    if (std::abs(eta.sum() - 1.0) > 1e-12 || eta.minCoeff() < 0) {
      ok = false;
      why = "eta not a normalized distribution";
      break;
    }
    double shift = 400.0 * unit(rng) - 200.0;
    Eigen::VectorXd eta2 =
        trajectory_weights((cost.array() + shift).matrix(), beta);
    if ((eta - eta2).cwiseAbs().maxCoeff() > 1e-12) {
      ok = false;
      why = "eta changed under a constant cost shift";
      break;
    }
  }

  if (ok) {
    const int d = 3, H = 8, K = 12;
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(H, d);
    Eigen::MatrixXd sigma = 0.3 * Eigen::MatrixXd::Identity(d, d);
    RolloutBatch batch;
    batch.v.resize(K);
    for (int it = 0; it < 1000 && ok; ++it) {
      for (int k = 0; k < K; ++k) {
        batch.v[k].resize(H, d);
        for (int h = 0; h < H; ++h)
          for (int c = 0; c < d; ++c) batch.v[k](h, c) = gauss(rng);
      }
      Eigen::VectorXd cost(K);
      for (int k = 0; k < K; ++k) cost[k] = 10.0 * unit(rng);
      Eigen::VectorXd eta = trajectory_weights(cost, 1.0);
      update_control_and_covariance(U, sigma, batch, eta, 0.98, 0.05);
      if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        ok = false;
        why = "sigma_c lost symmetry";
        break;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
      if (es.eigenvalues().minCoeff() < 1e-8 - 1e-12) {
        ok = false;
        why = format("sigma_c min eigenvalue %.3g under the 1e-8 floor",
                     es.eigenvalues().minCoeff());
        break;
      }
    }
  }

  if (ok) {
    const RobotModel model = RobotModel::planar3();
    for (int t = 0; t < 50 && ok; ++t) {
      const int n_obs = 1 + t % 12;
      RolloutBatch batch;
      batch.v.assign(1, Eigen::MatrixXd::Zero(1, model.dof()));
      Eigen::VectorXd q0(model.dof());
      for (int i = 0; i < model.dof(); ++i) q0[i] = -1.0 + 2.0 * unit(rng);
      rollout_robot(q0, Eigen::VectorXd::Zero(model.dof()),
                    Eigen::VectorXd::Constant(1, 0.02), batch);
      ObstaclePrediction obs;
      obs.count = n_obs;
      for (int i = 0; i < n_obs; ++i) {
        Vec3 c(2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0, 0.4 * unit(rng) - 0.2);
        obs.x.push_back(Eigen::Matrix3Xd(3, 1));
        obs.x.back().col(0) = c;
        obs.v.push_back(Vec3::Zero());
        obs.cov.push_back({Mat3::Identity()});
        obs.radius.push_back(Eigen::VectorXd::Constant(1, 0.1 + 0.6 * unit(rng)));
      }
      const double alpha = 25.0;
      double c_max = collision_cost(model, batch, obs,
                                    PlannerParams::CollisionMode::max, alpha)(0, 0);
      double c_soft = collision_cost(model, batch, obs,
                                     PlannerParams::CollisionMode::softmax, alpha)(0, 0);
      if (c_soft < c_max - 1e-12 ||
          c_soft > c_max + std::log(double(n_obs)) / alpha + 1e-12) {
        ok = false;
        why = format("softmax %.6g outside [max, max + ln(N)/a] around %.6g", c_soft,
                     c_max);
      }
    }
  }

  const RobotModel model = RobotModel::planar3();
  PlannerParams pp;
  if (ok) {
    Eigen::VectorXd q_goal(3);
    q_goal << 1.2, -0.4, 0.7;
    Planner shift_planner(pp, model, q_goal, derive_seed(seed, "shift"));
    JointState st{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
    for (int t = 0; t < 5 && ok; ++t) {
      Planner::StepResult sr = shift_planner.control_step(st, {});
      const Eigen::MatrixXd& pre = shift_planner.pre_shift();
      const Eigen::MatrixXd& post = shift_planner.nominal();
      const int H = pp.horizon;
      if ((sr.u0 - pre.row(0).transpose()).cwiseAbs().maxCoeff() != 0 ||
          (post.topRows(H - 1) - pre.bottomRows(H - 1)).cwiseAbs().maxCoeff() != 0 ||
          post.row(H - 1).cwiseAbs().maxCoeff() != 0) {
        ok = false;
        why = "warm-start shift identity violated";
      }
    }
  }

  double worst_u0 = 0;
  if (ok) {
    Eigen::VectorXd q_rest(3);
    q_rest << 0.4, 0.8, -0.6;  // bent pose, clear of the stretch singularity
    JointState st{q_rest, Eigen::VectorXd::Zero(3)};
    PlannerParams pp_eq = pp;
    // Station-keeping regression runs at the exploitation sampling scale; the
    // residual ||u0|| jitter plateaus near 1.5x the sampling stddev as the
    // warm-started rows accumulate weighted-average noise across the horizon.
    pp_eq.sigma_c0 = 9e-4 * Eigen::MatrixXd::Identity(3, 3);
    Planner eq_planner(pp_eq, model, st.q, derive_seed(seed, "equilibrium"));
    for (int t = 0; t < 50; ++t) {
      Planner::StepResult sr = eq_planner.control_step(st, {});
      worst_u0 = std::max(worst_u0, sr.u0.norm());
    }
    if (worst_u0 >= 0.1) {
      ok = false;
      why = format("free-space ||u0|| reached %.4g (limit 0.1)", worst_u0);
    }
  }

  out.pass = ok;
  out.worst = worst_u0;
  out.detail = ok ? format("all invariants hold, free-space ||u0|| peak %.3g", worst_u0)
                  : why;
  return out;
}

std::vector<CheckResult> run_oracle_checks(uint64_t seed) {
  return {check_filter_oracle(200, seed), check_covariance_oracle(100, 30, seed),
          check_assignment_oracle(100, seed)};
}

}  // namespace dynamap::checks
