#include "spmc/matrix_exp.hpp"

#include <cmath>

namespace spmc {
namespace {

double one_norm(const Matrix& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

// Evaluates the degree-d diagonal Pade approximant given the coefficient
// table b[0..d] and the even powers of a.
Matrix pade_solve(const Matrix& u, const Matrix& v) {
    // r = (v - u)^{-1} (v + u)
    return (v - u).partialPivLu().solve(v + u);
}

Matrix pade3(const Matrix& a, const Matrix& a2) {
    static const double b[] = {120, 60, 12, 1};
    const Matrix i = Matrix::Identity(a.rows(), a.cols());
    const Matrix u = a * (b[3] * a2 + b[1] * i);
    const Matrix v = b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

Matrix pade5(const Matrix& a, const Matrix& a2, const Matrix& a4) {
    static const double b[] = {30240, 15120, 3360, 420, 30, 1};
    const Matrix i = Matrix::Identity(a.rows(), a.cols());
    const Matrix u = a * (b[5] * a4 + b[3] * a2 + b[1] * i);
    const Matrix v = b[4] * a4 + b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

Matrix pade7(const Matrix& a, const Matrix& a2, const Matrix& a4, const Matrix& a6) {
    static const double b[] = {17297280, 8648640, 1995840, 277200, 25200, 1512, 56, 1};
    const Matrix i = Matrix::Identity(a.rows(), a.cols());
    const Matrix u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * i);
    const Matrix v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

Matrix pade9(const Matrix& a, const Matrix& a2, const Matrix& a4, const Matrix& a6) {
    static const double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                               30270240.0,    2162160.0,    110880.0,     3960.0,
                               90.0,          1.0};
    const Matrix i = Matrix::Identity(a.rows(), a.cols());
    const Matrix a8 = a6 * a2;
    const Matrix u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * i);
    const Matrix v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

Matrix pade13(const Matrix& a, const Matrix& a2, const Matrix& a4, const Matrix& a6) {
    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const Matrix i = Matrix::Identity(a.rows(), a.cols());
    const Matrix u =
        a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
             b[3] * a2 + b[1] * i);
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                     b[4] * a4 + b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

}  // namespace

Matrix matrix_exponential(const Matrix& a) {
    // Degree thresholds from Higham 2005, Table 2.3.
    constexpr double theta3 = 1.495585217958292e-2;
    constexpr double theta5 = 2.539398330063230e-1;
    constexpr double theta7 = 9.504178996162932e-1;
    constexpr double theta9 = 2.097847961257068;
    constexpr double theta13 = 5.371920351148152;

    const double norm = one_norm(a);
    const Matrix a2 = a * a;
    if (norm <= theta3) return pade3(a, a2);
    const Matrix a4 = a2 * a2;
    if (norm <= theta5) return pade5(a, a2, a4);
    const Matrix a6 = a4 * a2;
    if (norm <= theta7) return pade7(a, a2, a4, a6);
    if (norm <= theta9) return pade9(a, a2, a4, a6);

    int squarings = 0;
    Matrix scaled = a;
    if (norm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
        scaled = a / std::ldexp(1.0, squarings);
    }
    const Matrix s2 = scaled * scaled;
    const Matrix s4 = s2 * s2;
    const Matrix s6 = s4 * s2;
    Matrix r = pade13(scaled, s2, s4, s6);
    for (int k = 0; k < squarings; ++k) r = r * r;
    return r;
}

}  // namespace spmc
