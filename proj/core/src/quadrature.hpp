#pragma once

// Shared 24-point Gauss-Legendre rule used by the kernel and oracle
// quadratures.  Nodes are on [-1, 1]; weights sum to 2.

namespace homtom {
namespace detail {

constexpr int kGaussN = 24;

constexpr double kGaussX[24] = {
    -9.95187219997021311e-01, -9.74728555971309474e-01, -9.38274552002732798e-01,
    -8.86415527004400960e-01, -8.20001985973902947e-01, -7.40124191578554358e-01,
    -6.48093651936975546e-01, -5.45421471388839563e-01, -4.33793507626045127e-01,
    -3.15042679696163397e-01, -1.91118867473616311e-01, -6.40568928626056300e-02,
    6.40568928626056300e-02, 1.91118867473616311e-01, 3.15042679696163397e-01,
    4.33793507626045127e-01, 5.45421471388839563e-01, 6.48093651936975546e-01,
    7.40124191578554358e-01, 8.20001985973902947e-01, 8.86415527004400960e-01,
    9.38274552002732798e-01, 9.74728555971309474e-01, 9.95187219997021311e-01,
};

constexpr double kGaussW[24] = {
    1.23412297999870909e-02, 2.85313886289337432e-02, 4.42774388174195510e-02,
    5.92985849154367417e-02, 7.33464814110804109e-02, 8.61901615319532882e-02,
    9.76186521041140648e-02, 1.07444270115965607e-01, 1.15505668053725613e-01,
    1.21670472927803419e-01, 1.25837456346828303e-01, 1.27938195346752215e-01,
    1.27938195346752215e-01, 1.25837456346828303e-01, 1.21670472927803419e-01,
    1.15505668053725613e-01, 1.07444270115965607e-01, 9.76186521041140648e-02,
    8.61901615319532882e-02, 7.33464814110804109e-02, 5.92985849154367417e-02,
    4.42774388174195510e-02, 2.85313886289337432e-02, 1.23412297999870909e-02,
};

}  // namespace detail
}  // namespace homtom
