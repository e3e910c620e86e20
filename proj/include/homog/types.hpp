#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <stdexcept>
#include <string>

namespace homog {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Mat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<Complex>;
using RSpMat = Eigen::SparseMatrix<double>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

constexpr double kPi = 3.14159265358979323846;

enum class Model { I, II };
enum class Region { soft, stiff };

inline const char* to_string(Model m) { return m == Model::I ? "I" : "II"; }
inline const char* to_string(Region r) { return r == Region::soft ? "soft" : "stiff"; }

// Error hierarchy. Every domain error derives from Error so callers can catch
// the whole family at task boundaries.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define HOMOG_DEFINE_ERROR(Name)                                 \
  struct Name : Error {                                          \
    explicit Name(const std::string& what) : Error(what) {}      \
  }

HOMOG_DEFINE_ERROR(GeometryError);
HOMOG_DEFINE_ERROR(MeshError);
HOMOG_DEFINE_ERROR(ContrastError);
HOMOG_DEFINE_ERROR(SolverError);
HOMOG_DEFINE_ERROR(SingularError);
HOMOG_DEFINE_ERROR(ResonanceError);
HOMOG_DEFINE_ERROR(IllConditionedError);
HOMOG_DEFINE_ERROR(DegenerateError);
HOMOG_DEFINE_ERROR(FitError);
HOMOG_DEFINE_ERROR(ModelMismatchError);
HOMOG_DEFINE_ERROR(PoleError);
HOMOG_DEFINE_ERROR(MultiplierSingularError);
HOMOG_DEFINE_ERROR(ConfigError);
HOMOG_DEFINE_ERROR(ConvergenceError);

#undef HOMOG_DEFINE_ERROR

}  // namespace homog
