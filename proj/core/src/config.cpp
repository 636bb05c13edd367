#include "sweep/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace sweep {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown field '" + where + it.key() + "'");
}

std::vector<double> as_vector(const json& arr, const std::string& field) {
  if (!arr.is_array()) throw ConfigError("config: '" + field + "' must be an array");
  std::vector<double> out;
  for (const auto& v : arr) out.push_back(v.get<double>());
  return out;
}

ConstraintForm parse_constraint(const json& c, const std::string& where) {
  require_keys(c, where, {"type", "a", "b", "radius", "center"});
  ConstraintForm f;
  const std::string type = c.at("type").get<std::string>();
  if (type == "affine") {
    f.kind = ConstraintForm::Kind::Affine;
    auto av = as_vector(c.at("a"), where + "a");
    f.a = Eigen::Map<Vec>(av.data(), static_cast<int>(av.size()));
    f.b = c.value("b", 0.0);
  } else if (type == "pair-disk") {
    f.kind = ConstraintForm::Kind::PairDisk;
    f.radius = c.at("radius").get<double>();
  } else if (type == "ball") {
    f.kind = ConstraintForm::Kind::Ball;
    f.radius = c.at("radius").get<double>();
    auto cv = as_vector(c.at("center"), where + "center");
    f.center = Eigen::Map<Vec>(cv.data(), static_cast<int>(cv.size()));
  } else if (type == "ball-complement") {
    f.kind = ConstraintForm::Kind::BallComplement;
    f.radius = c.at("radius").get<double>();
    auto cv = as_vector(c.at("center"), where + "center");
    f.center = Eigen::Map<Vec>(cv.data(), static_cast<int>(cv.size()));
  } else {
    throw ConfigError("config: unknown constraint type '" + type + "'");
  }
  return f;
}

}  // namespace

ModelConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  require_keys(root, "", {"model", "variant", "case", "k", "k_list", "tol", "seed", "solver",
                          "epsilon_loc", "mu", "custom"});
  ModelConfig cfg;
  if (!root.contains("model")) throw ConfigError("config: missing required field 'model'");
  cfg.model = root.at("model").get<std::string>();
  if (cfg.model != "builtin-car" && cfg.model != "builtin-crowd" && cfg.model != "custom")
    throw ConfigError("config: field 'model' must be builtin-car, builtin-crowd or custom");
  cfg.variant = root.value("variant", std::string("standard"));
  cfg.case_name = root.value("case", std::string("contact"));
  cfg.k = root.value("k", 100);
  if (cfg.k < 2) throw ConfigError("config: field 'k' must be at least 2");
  if (root.contains("k_list")) {
    cfg.k_list.clear();
    for (const auto& v : root.at("k_list")) cfg.k_list.push_back(v.get<int>());
  }
  cfg.tol = root.value("tol", 1e-6);
  cfg.seed = root.value("seed", 1u);
  cfg.epsilon_loc = root.value("epsilon_loc", 0.5);
  cfg.mu = root.value("mu", 0.1);
  if (root.contains("solver")) {
    const json& s = root.at("solver");
    require_keys(s, "solver.", {"max_outer", "max_inner", "penalty_growth", "tol_kkt", "fd_step"});
    cfg.solver.max_outer = s.value("max_outer", cfg.solver.max_outer);
    cfg.solver.max_inner = s.value("max_inner", cfg.solver.max_inner);
    cfg.solver.penalty_growth = s.value("penalty_growth", cfg.solver.penalty_growth);
    cfg.solver.tol_kkt = s.value("tol_kkt", cfg.solver.tol_kkt);
    cfg.solver.fd_step = s.value("fd_step", cfg.solver.fd_step);
  }

  if (cfg.model == "custom") {
    if (!root.contains("custom")) throw ConfigError("config: custom model requires 'custom' block");
    const json& c = root.at("custom");
    require_keys(c, "custom.",
                 {"n", "d", "m", "horizon", "x0", "r1", "r2", "m1", "m2", "m3", "beta", "rho",
                  "lipschitz_k", "growth_m", "constraints", "f", "phi", "ell", "u_init", "a_init"});
    ModelConfig::Custom cu;
    cu.n = c.at("n").get<int>();
    cu.d = c.at("d").get<int>();
    cu.m = c.at("m").get<int>();
    cu.horizon = c.at("horizon").get<double>();
    cu.x0 = as_vector(c.at("x0"), "custom.x0");
    cu.r1 = c.at("r1").get<double>();
    cu.r2 = c.at("r2").get<double>();
    if (!(cu.r1 > 0.0))
      throw ConfigError("config: field 'custom.r1' must be strictly positive");
    if (cu.r2 < cu.r1) throw ConfigError("config: need custom.r1 <= custom.r2");
    cu.m1 = c.value("m1", 1.0);
    cu.m2 = c.value("m2", 1.0);
    cu.m3 = c.value("m3", 0.0);
    cu.beta = c.value("beta", 1.0);
    cu.rho = c.value("rho", 1.0);
    cu.lipschitz_k = c.value("lipschitz_k", 0.0);
    cu.growth_m = c.value("growth_m", 1.0);
    if (!c.contains("constraints") || !c.at("constraints").is_array() || c.at("constraints").empty())
      throw ConfigError("config: custom model requires a nonempty 'custom.constraints' array");
    int idx = 0;
    for (const auto& cc : c.at("constraints"))
      cu.constraints.push_back(parse_constraint(cc, "custom.constraints[" + std::to_string(idx++) + "]."));
    if (static_cast<int>(cu.constraints.size()) != cu.m)
      throw ConfigError("config: custom.m does not match the number of constraints");
    if (static_cast<int>(cu.x0.size()) != cu.n)
      throw ConfigError("config: custom.x0 length does not match custom.n");
    if (!c.contains("f")) throw ConfigError("config: custom model requires field 'custom.f'");
    const json& fj = c.at("f");
    require_keys(fj, "custom.f.", {"type", "matrix", "state_matrix", "offset"});
    cu.f_type = fj.at("type").get<std::string>();
    if (cu.f_type != "linear" && cu.f_type != "affine")
      throw ConfigError("config: custom.f.type must be linear or affine");
    cu.f_matrix = as_vector(fj.at("matrix"), "custom.f.matrix");
    if (static_cast<int>(cu.f_matrix.size()) != cu.n * cu.d)
      throw ConfigError("config: custom.f.matrix must have n*d entries");
    if (cu.f_type == "affine") {
      cu.f_state = as_vector(fj.at("state_matrix"), "custom.f.state_matrix");
      if (static_cast<int>(cu.f_state.size()) != cu.n * cu.n)
        throw ConfigError("config: custom.f.state_matrix must have n*n entries");
      if (fj.contains("offset")) cu.f_offset = as_vector(fj.at("offset"), "custom.f.offset");
    }
    if (c.contains("phi")) {
      const json& p = c.at("phi");
      require_keys(p, "custom.phi.", {"type", "weight"});
      cu.phi_type = p.at("type").get<std::string>();
      cu.phi_weight = p.value("weight", 1.0);
      if (cu.phi_type != "half-norm-squared" && cu.phi_type != "none")
        throw ConfigError("config: custom.phi.type must be half-norm-squared or none");
    }
    if (c.contains("ell")) {
      const json& p = c.at("ell");
      require_keys(p, "custom.ell.", {"type", "weight"});
      cu.ell_type = p.at("type").get<std::string>();
      cu.ell_weight = p.value("weight", 1.0);
      if (cu.ell_type != "control-energy" && cu.ell_type != "none")
        throw ConfigError("config: custom.ell.type must be control-energy or none");
    }
    if (c.contains("u_init")) cu.u_init = as_vector(c.at("u_init"), "custom.u_init");
    if (c.contains("a_init")) cu.a_init = as_vector(c.at("a_init"), "custom.a_init");
    cfg.custom = cu;
  } else if (root.contains("custom")) {
    throw ConfigError("config: builtin models reject the 'custom' block");
  }
  return cfg;
}

ModelConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string config_to_json(const ModelConfig& cfg) {
  json root;
  root["model"] = cfg.model;
  root["variant"] = cfg.variant;
  root["case"] = cfg.case_name;
  root["k"] = cfg.k;
  root["k_list"] = cfg.k_list;
  root["tol"] = cfg.tol;
  root["seed"] = cfg.seed;
  root["epsilon_loc"] = cfg.epsilon_loc;
  root["mu"] = cfg.mu;
  root["solver"] = {{"max_outer", cfg.solver.max_outer},
                    {"max_inner", cfg.solver.max_inner},
                    {"penalty_growth", cfg.solver.penalty_growth},
                    {"tol_kkt", cfg.solver.tol_kkt},
                    {"fd_step", cfg.solver.fd_step}};
  if (cfg.custom) {
    const auto& cu = *cfg.custom;
    json c;
    c["n"] = cu.n;
    c["d"] = cu.d;
    c["m"] = cu.m;
    c["horizon"] = cu.horizon;
    c["x0"] = cu.x0;
    c["r1"] = cu.r1;
    c["r2"] = cu.r2;
    c["m1"] = cu.m1;
    c["m2"] = cu.m2;
    c["m3"] = cu.m3;
    c["beta"] = cu.beta;
    c["rho"] = cu.rho;
    c["lipschitz_k"] = cu.lipschitz_k;
    c["growth_m"] = cu.growth_m;
    json cons = json::array();
    for (const auto& f : cu.constraints) {
      json fc;
      switch (f.kind) {
        case ConstraintForm::Kind::Affine: {
          fc["type"] = "affine";
          std::vector<double> av(f.a.data(), f.a.data() + f.a.size());
          fc["a"] = av;
          fc["b"] = f.b;
          break;
        }
        case ConstraintForm::Kind::PairDisk:
          fc["type"] = "pair-disk";
          fc["radius"] = f.radius;
          break;
        case ConstraintForm::Kind::Ball:
        case ConstraintForm::Kind::BallComplement: {
          fc["type"] = f.kind == ConstraintForm::Kind::Ball ? "ball" : "ball-complement";
          fc["radius"] = f.radius;
          std::vector<double> cv(f.center.data(), f.center.data() + f.center.size());
          fc["center"] = cv;
          break;
        }
      }
      cons.push_back(fc);
    }
    c["constraints"] = cons;
    json fj;
    fj["type"] = cu.f_type;
    fj["matrix"] = cu.f_matrix;
    if (cu.f_type == "affine") {
      fj["state_matrix"] = cu.f_state;
      if (!cu.f_offset.empty()) fj["offset"] = cu.f_offset;
    }
    c["f"] = fj;
    c["phi"] = {{"type", cu.phi_type}, {"weight", cu.phi_weight}};
    c["ell"] = {{"type", cu.ell_type}, {"weight", cu.ell_weight}};
    if (!cu.u_init.empty()) c["u_init"] = cu.u_init;
    if (!cu.a_init.empty()) c["a_init"] = cu.a_init;
    root["custom"] = c;
  }
  return root.dump(2);
}

Model instantiate(const ModelConfig& cfg) {
  if (cfg.model == "builtin-car") {
    if (cfg.variant != "standard" && cfg.variant != "heavy-energy")
      throw ConfigError("config: car variant must be standard or heavy-energy");
    return builtin_car(cfg.variant == "standard" ? CarVariant::Standard : CarVariant::HeavyEnergy);
  }
  if (cfg.model == "builtin-crowd") {
    if (cfg.case_name != "contact" && cfg.case_name != "free")
      throw ConfigError("config: crowd case must be contact or free");
    return builtin_crowd(cfg.case_name == "contact" ? CrowdCase::Contact : CrowdCase::Free);
  }

  const auto& cu = *cfg.custom;
  Model mdl;
  mdl.name = "custom";
  mdl.spec.set = make_set(cu.n, cu.constraints, cu.m1, cu.m2, cu.m3, cu.beta, cu.rho);
  mdl.spec.n = cu.n;
  mdl.spec.d = cu.d;
  Mat B = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      cu.f_matrix.data(), cu.n, cu.d);
  if (cu.f_type == "linear") {
    mdl.spec.f = [B](const Vec&, const Vec& a) { return Vec(B * a); };
    mdl.spec.grad_f_x = [n = cu.n](const Vec&, const Vec&) { return Mat::Zero(n, n); };
    mdl.spec.grad_f_a = [B](const Vec&, const Vec&) { return B; };
  } else {
    Mat A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cu.f_state.data(), cu.n, cu.n);
    Vec c0 = Vec::Zero(cu.n);
    if (!cu.f_offset.empty())
      c0 = Eigen::Map<const Vec>(cu.f_offset.data(), static_cast<int>(cu.f_offset.size()));
    mdl.spec.f = [A, B, c0](const Vec& x, const Vec& a) { return Vec(A * x + B * a + c0); };
    mdl.spec.grad_f_x = [A](const Vec&, const Vec&) { return A; };
    mdl.spec.grad_f_a = [B](const Vec&, const Vec&) { return B; };
  }
  mdl.spec.horizon = cu.horizon;
  mdl.spec.x0 = Eigen::Map<const Vec>(cu.x0.data(), static_cast<int>(cu.x0.size()));
  mdl.spec.r1 = cu.r1;
  mdl.spec.r2 = cu.r2;
  mdl.spec.lipschitz_k = cu.lipschitz_k;
  mdl.spec.growth_m = cu.growth_m;

  const double pw = cu.phi_weight;
  if (cu.phi_type == "half-norm-squared") {
    mdl.cost.phi = [pw](const Vec& x) { return 0.5 * pw * x.squaredNorm(); };
    mdl.cost.grad_phi = [pw](const Vec& x) { return Vec(pw * x); };
  } else {
    mdl.cost.phi = [](const Vec&) { return 0.0; };
    mdl.cost.grad_phi = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
  }
  const double ew = cu.ell_weight;
  if (cu.ell_type == "control-energy") {
    mdl.cost.ell = [ew](double, const Vec&, const Vec&, const Vec& a, const Vec&, const Vec&,
                        const Vec&) { return 0.5 * ew * a.squaredNorm(); };
    mdl.cost.grad_ell = [ew](double, const Vec& x, const Vec& u, const Vec& a, const Vec& xd,
                             const Vec& ud, const Vec& ad) {
      CostGrad g;
      g.x = Vec::Zero(x.size());
      g.u = Vec::Zero(u.size());
      g.a = ew * a;
      g.xd = Vec::Zero(xd.size());
      g.ud = Vec::Zero(ud.size());
      g.ad = Vec::Zero(ad.size());
      return g;
    };
  } else {
    mdl.cost.ell = [](double, const Vec&, const Vec&, const Vec&, const Vec&, const Vec&,
                      const Vec&) { return 0.0; };
    mdl.cost.grad_ell = [](double, const Vec& x, const Vec& u, const Vec& a, const Vec& xd,
                           const Vec& ud, const Vec& ad) {
      CostGrad g;
      g.x = Vec::Zero(x.size());
      g.u = Vec::Zero(u.size());
      g.a = Vec::Zero(a.size());
      g.xd = Vec::Zero(xd.size());
      g.ud = Vec::Zero(ud.size());
      g.ad = Vec::Zero(ad.size());
      return g;
    };
  }

  mdl.has_analytic = false;
  if (!cu.u_init.empty())
    mdl.default_u_init = Eigen::Map<const Vec>(cu.u_init.data(), static_cast<int>(cu.u_init.size()));
  if (!cu.a_init.empty())
    mdl.default_a_init = Eigen::Map<const Vec>(cu.a_init.data(), static_cast<int>(cu.a_init.size()));
  return mdl;
}

}  // namespace sweep
