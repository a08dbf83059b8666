#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedtime/config.hpp"
#include "fedtime/datagen.hpp"
#include "fedtime/estimate.hpp"
#include "fedtime/fedsim.hpp"
#include "fedtime/learner.hpp"
#include "fedtime/plan.hpp"
#include "fedtime/profiles.hpp"

namespace py = pybind11;
using namespace fedtime;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Deterministic time-to-target simulator and planner for federated learning "
            "over heterogeneous edge servers";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SimError>(m, "SimError", PyExc_RuntimeError);
  py::register_exception<RankDeficientError>(m, "RankDeficientError", PyExc_RuntimeError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

  // profiles
  py::class_<DeviceProfile>(m, "DeviceProfile")
      .def(py::init<>())
      .def_readwrite("id", &DeviceProfile::id)
      .def_readwrite("sample_upload_s", &DeviceProfile::sample_upload_s)
      .def_readwrite("sample_compute_s", &DeviceProfile::sample_compute_s)
      .def_readwrite("step_overhead_s", &DeviceProfile::step_overhead_s)
      .def_readwrite("sample_forward_s", &DeviceProfile::sample_forward_s)
      .def_readwrite("weight", &DeviceProfile::weight)
      .def_readwrite("dataset_kind", &DeviceProfile::dataset_kind);

  py::class_<SystemProfile>(m, "SystemProfile")
      .def(py::init<>())
      .def_readwrite("model_distribute_s", &SystemProfile::model_distribute_s)
      .def_readwrite("model_upload_s", &SystemProfile::model_upload_s)
      .def_readwrite("devices", &SystemProfile::devices)
      .def("validate", &SystemProfile::validate)
      .def("device_index", &SystemProfile::device_index);

  py::class_<ForwardPair>(m, "ForwardPair")
      .def(py::init<>())
      .def_readwrite("slow_id", &ForwardPair::slow_id)
      .def_readwrite("fast_id", &ForwardPair::fast_id)
      .def_readwrite("alpha", &ForwardPair::alpha);

  py::class_<TrainPlan>(m, "TrainPlan")
      .def(py::init<>())
      .def_static("uniform", &TrainPlan::uniform, py::arg("ids"), py::arg("e"), py::arg("n"))
      .def_readwrite("selected", &TrainPlan::selected)
      .def_readwrite("epochs", &TrainPlan::epochs)
      .def_readwrite("batch", &TrainPlan::batch)
      .def_readwrite("pairs", &TrainPlan::pairs)
      .def_readwrite("staleness_cap", &TrainPlan::staleness_cap);

  m.def("upload_time", &upload_time, py::arg("dev"), py::arg("n"), py::arg("e"));
  m.def("compute_time", &compute_time, py::arg("dev"), py::arg("n"), py::arg("e"));
  m.def("forward_time", &forward_time, py::arg("dev"), py::arg("n"), py::arg("e"));
  m.def("round_cost", &round_cost, py::arg("sys"), py::arg("dev"), py::arg("n"), py::arg("e"));
  m.def("pair_round_cost", &pair_round_cost);
  m.def("optimal_alpha", &optimal_alpha, py::arg("rounds_slow"), py::arg("c_slow"),
        py::arg("rounds_fast"), py::arg("c_fast"), py::arg("c_pair"));

  py::class_<SyncRoundTime>(m, "SyncRoundTime")
      .def_readonly("seconds", &SyncRoundTime::seconds)
      .def_readonly("slowest_id", &SyncRoundTime::slowest_id);
  m.def("round_time_sync", &round_time_sync);

  py::class_<PairTimes>(m, "PairTimes")
      .def_readonly("slow_branch", &PairTimes::slow_branch)
      .def_readonly("fast_branch", &PairTimes::fast_branch)
      .def("overall", &PairTimes::overall);
  m.def("pair_times", &pair_times);

  // data
  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("features", &Dataset::features)
      .def_readwrite("labels", &Dataset::labels)
      .def_readwrite("num_classes", &Dataset::num_classes)
      .def("size", &Dataset::size)
      .def("dim", &Dataset::dim);
  m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));
  m.def("synth_classification", &synth_classification, py::arg("num_classes"),
        py::arg("input_dim"), py::arg("per_class"), py::arg("margin"), py::arg("seed"));
  m.def("save_dataset", &save_dataset);
  m.def("load_dataset", &load_dataset);

  py::class_<PartitionSpec>(m, "PartitionSpec")
      .def(py::init<>())
      .def_readwrite("num_servers", &PartitionSpec::num_servers)
      .def_readwrite("labels_per_server", &PartitionSpec::labels_per_server)
      .def_readwrite("unique_on_slow", &PartitionSpec::unique_on_slow)
      .def_readwrite("slow_servers", &PartitionSpec::slow_servers)
      .def_readwrite("seed", &PartitionSpec::seed);
  py::class_<Partition>(m, "Partition")
      .def(py::init<>())
      .def_readwrite("indices", &Partition::indices)
      .def_readwrite("labels", &Partition::labels);
  m.def("make_partition", &make_partition);
  m.def("size_weights", &size_weights);

  // learner
  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_static("zeros", &ModelParams::zeros, py::arg("input_dim"), py::arg("num_classes"))
      .def_readwrite("weights", &ModelParams::weights)
      .def_readwrite("bias", &ModelParams::bias)
      .def("all_finite", &ModelParams::all_finite);
  m.def("loss",
        py::overload_cast<const ModelParams&, const Eigen::MatrixXd&, const std::vector<int>&>(
            &loss));
  m.def("gradient",
        py::overload_cast<const ModelParams&, const Eigen::MatrixXd&, const std::vector<int>&>(
            &gradient));
  m.def("sgd_step", &sgd_step, py::arg("params"), py::arg("grad"), py::arg("eta"));
  m.def("accuracy",
        py::overload_cast<const ModelParams&, const Eigen::MatrixXd&, const std::vector<int>&>(
            &accuracy));
  m.def("save_model", &save_model);
  m.def("load_model", &load_model);

  py::class_<LRSchedule> sched(m, "LRSchedule");
  py::enum_<LRSchedule::Mode>(sched, "Mode")
      .value("experimental", LRSchedule::Mode::experimental)
      .value("theoretical", LRSchedule::Mode::theoretical);
  sched.def(py::init<>())
      .def_readwrite("mode", &LRSchedule::mode)
      .def_readwrite("eta0", &LRSchedule::eta0)
      .def_readwrite("decay", &LRSchedule::decay)
      .def_readwrite("mu", &LRSchedule::mu)
      .def_readwrite("gamma", &LRSchedule::gamma)
      .def("at", &LRSchedule::at, py::arg("step"), py::arg("round"))
      .def("staleness_compatible", &LRSchedule::staleness_compatible, py::arg("local_epochs"),
           py::arg("tau"), py::arg("horizon") = 10000);

  // simulation
  py::class_<StopRule>(m, "StopRule")
      .def(py::init<>())
      .def_readwrite("target_loss", &StopRule::target_loss)
      .def_readwrite("max_rounds", &StopRule::max_rounds)
      .def_readwrite("max_wallclock_s", &StopRule::max_wallclock_s);

  py::class_<RunConfig> rc(m, "RunConfig");
  py::enum_<RunConfig::Mode>(rc, "Mode")
      .value("sync", RunConfig::Mode::sync)
      .value("async_", RunConfig::Mode::async);
  rc.def(py::init<>())
      .def_readwrite("mode", &RunConfig::mode)
      .def_readwrite("plan", &RunConfig::plan)
      .def_readwrite("schedule", &RunConfig::schedule)
      .def_readwrite("stop", &RunConfig::stop)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("eval_every", &RunConfig::eval_every)
      .def_readwrite("eval_grid_s", &RunConfig::eval_grid_s);

  py::class_<TraceRecord>(m, "TraceRecord")
      .def_readonly("round", &TraceRecord::round)
      .def_readonly("wallclock_s", &TraceRecord::wallclock_s)
      .def_readonly("loss", &TraceRecord::loss)
      .def_readonly("accuracy", &TraceRecord::accuracy)
      .def_readonly("slowest", &TraceRecord::slowest);
  py::class_<RunTrace>(m, "RunTrace")
      .def_readonly("records", &RunTrace::records)
      .def_readonly("final_model", &RunTrace::final_model)
      .def_readonly("rounds_completed", &RunTrace::rounds_completed)
      .def_readonly("mean_round_s", &RunTrace::mean_round_s)
      .def_readonly("max_ledger_gap", &RunTrace::max_ledger_gap)
      .def_readonly("reached_target", &RunTrace::reached_target);

  m.def("run_sync", &run_sync, py::arg("config"), py::arg("sys"), py::arg("part"),
        py::arg("ds"), py::arg("observer") = nullptr);
  m.def("run_async", &run_async);
  m.def("run", &run);
  m.def("time_to_target_loss", &time_to_target_loss);
  m.def("time_to_target_accuracy", &time_to_target_accuracy);
  m.def("rounds_to_target_loss", &rounds_to_target_loss);

  // estimation
  py::class_<ProbeObservation>(m, "ProbeObservation")
      .def(py::init<>())
      .def_readwrite("epochs", &ProbeObservation::epochs)
      .def_readwrite("batch", &ProbeObservation::batch)
      .def_readwrite("rounds_to_a", &ProbeObservation::rounds_to_a)
      .def_readwrite("rounds_to_b", &ProbeObservation::rounds_to_b)
      .def_readwrite("min_loss", &ProbeObservation::min_loss)
      .def_readwrite("mean_round_s", &ProbeObservation::mean_round_s);

  py::class_<BoundParams> bp(m, "BoundParams");
  py::enum_<BoundParams::Variant>(bp, "Variant")
      .value("sync", BoundParams::Variant::sync)
      .value("async_", BoundParams::Variant::async);
  bp.def(py::init<>())
      .def_readwrite("A", &BoundParams::A)
      .def_readwrite("B", &BoundParams::B)
      .def_readwrite("C", &BoundParams::C)
      .def_readwrite("D", &BoundParams::D)
      .def_readwrite("variant", &BoundParams::variant);

  py::class_<TimingFit>(m, "TimingFit")
      .def(py::init<>())
      .def_readwrite("zeta", &TimingFit::zeta)
      .def_readwrite("u", &TimingFit::u)
      .def_readwrite("ids", &TimingFit::ids)
      .def_readwrite("alpha", &TimingFit::alpha)
      .def_readwrite("beta", &TimingFit::beta)
      .def("overhead_s", &TimingFit::overhead_s)
      .def("round_seconds", &TimingFit::round_seconds);

  py::class_<ProbeSettings>(m, "ProbeSettings")
      .def(py::init<>())
      .def_readwrite("probes", &ProbeSettings::probes)
      .def_readwrite("loss_a", &ProbeSettings::loss_a)
      .def_readwrite("loss_b", &ProbeSettings::loss_b)
      .def_readwrite("max_rounds", &ProbeSettings::max_rounds);
  m.def("probe", &probe);
  m.def("fit_bound", &fit_bound, py::arg("obs"), py::arg("loss_a"), py::arg("loss_b"),
        py::arg("loss_star"), py::arg("variant") = BoundParams::Variant::sync);
  m.def("fit_timing", &fit_timing, py::arg("obs"), py::arg("ids"),
        py::arg("pinned_zeta") = std::nullopt, py::arg("pinned_u") = std::nullopt);

  // planning
  py::class_<Objective>(m, "Objective")
      .def(py::init<>())
      .def_readwrite("bound", &Objective::bound)
      .def_readwrite("timing", &Objective::timing)
      .def_readwrite("epsilon", &Objective::epsilon)
      .def_readwrite("members", &Objective::members)
      .def_readwrite("member_weight", &Objective::member_weight)
      .def_readwrite("pairs", &Objective::pairs)
      .def_readwrite("pair_en_coeff", &Objective::pair_en_coeff)
      .def_readwrite("pair_e_coeff", &Objective::pair_e_coeff);
  py::class_<IntDomain>(m, "IntDomain")
      .def(py::init<int, int>(), py::arg("lo"), py::arg("hi"))
      .def_readwrite("lo", &IntDomain::lo)
      .def_readwrite("hi", &IntDomain::hi);
  py::class_<AcsResult>(m, "AcsResult")
      .def_readonly("e_star", &AcsResult::e_star)
      .def_readonly("n_star", &AcsResult::n_star)
      .def_readonly("predicted_s", &AcsResult::predicted_s)
      .def_readonly("sweeps", &AcsResult::sweeps)
      .def_readonly("trajectory", &AcsResult::trajectory);
  py::class_<CandidateResult>(m, "CandidateResult")
      .def_readonly("drops", &CandidateResult::drops)
      .def_readonly("members", &CandidateResult::members)
      .def_readonly("feasible", &CandidateResult::feasible)
      .def_readonly("bound_d", &CandidateResult::bound_d)
      .def_readonly("acs", &CandidateResult::acs);
  py::class_<PlanResult>(m, "PlanResult")
      .def_readonly("e_star", &PlanResult::e_star)
      .def_readonly("n_star", &PlanResult::n_star)
      .def_readonly("selected", &PlanResult::selected)
      .def_readonly("pairs", &PlanResult::pairs)
      .def_readonly("predicted_s", &PlanResult::predicted_s)
      .def_readonly("acs_sweeps", &PlanResult::acs_sweeps)
      .def_readonly("trajectory", &PlanResult::trajectory)
      .def_readonly("candidates", &PlanResult::candidates);

  m.def("predicted_time_sync", &predicted_time_sync);
  m.def("predicted_time_async", &predicted_time_async);
  m.def("predicted_time", &predicted_time);
  m.def("optimal_alphas", &optimal_alphas);
  m.def("acs_optimize", &acs_optimize, py::arg("obj"), py::arg("e_dom"), py::arg("n_dom"),
        py::arg("theta"));
  m.def("build_pairs", &build_pairs, py::arg("timing"), py::arg("selected"), py::arg("e_ref"),
        py::arg("n_ref"));
  m.def("slowest_first", &slowest_first);
  m.def("select_servers", &select_servers, py::arg("sys"), py::arg("timing"),
        py::arg("per_drop"), py::arg("epsilon"), py::arg("e_dom"), py::arg("n_dom"),
        py::arg("theta"), py::arg("with_pairs") = false);

#ifdef FEDTIME_VERSION
  m.attr("__version__") = FEDTIME_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
