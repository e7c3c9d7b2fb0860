#pragma once

// Default values shared by the library, the CLI and its --help text.

namespace mscr::defaults {

// magnetics
inline constexpr double kMagnetMoment = 342.86;        // A*m^2, calibrated RME moment
inline constexpr double kWorkingRangeMin = 0.100;      // m
inline constexpr double kWorkingRangeMax = 0.250;      // m
inline constexpr double kPositionStep = 1e-6;          // m, central differences

// elastica
inline constexpr int kGridNodes = 128;
inline constexpr double kShootingTolerance = 1e-8;     // rad/m on theta'(L)
inline constexpr int kShootingMaxIterations = 50;
inline constexpr double kMagnetHeight = 0.18;          // m above the distal end
inline constexpr int kSweepPoints = 100;

// jacobian
inline constexpr double kPsiStep = 1e-4;               // rad, numeric Jacobian
inline constexpr double kMagnetStep = 1e-5;            // m, position Jacobian
inline constexpr double kDamping = 0.05;               // rad/rad
inline constexpr int kJacobianTablePoints = 181;

// control
inline constexpr double kLesoBeta1 = 1.0;
inline constexpr double kLesoBeta2 = 0.01;
inline constexpr double kLesoEps = 0.01;               // s
inline constexpr double kTdSpeed = 10.0;
inline constexpr double kTdK1 = 0.1;
inline constexpr double kTdK2 = 1.0;
inline constexpr double kGain = 1.02;                  // 1/s
inline constexpr double kJointLimit = 2.356194490192345;  // 3*pi/4 rad
inline constexpr double kDt = 0.01;                    // s
inline constexpr double kDuration = 10.0;              // s

// vision
inline constexpr double kLinearityThreshold = 0.02;
inline constexpr double kAlphaStep = 0.1;              // rad
inline constexpr double kPixelPitch = 5e-5;            // m/px
inline constexpr int kStrokeWidth = 3;                 // px
inline constexpr double kSlopeTie = 0.02;
inline constexpr double kTipWindow = 0.3;              // fraction of body length

// pathfollow
inline constexpr double kTaskGain = 0.5;
inline constexpr double kAdvanceThreshold = 0.01;      // relative error change
inline constexpr int kAdvanceWindow = 5;               // steps
inline constexpr double kAdvanceTolerance = 1e-5;      // m, absolute error accept
inline constexpr double kBaseRateLimit = 0.005;        // m/s
inline constexpr double kPsiRateLimit = 1.0;           // rad/s
inline constexpr double kSingularCondition = 1e6;
inline constexpr int kWaypointStepBudget = 2000;

}  // namespace mscr::defaults
