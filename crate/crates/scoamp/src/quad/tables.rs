// Generated node tables.

pub(crate) const GL16_NODES: [f64; 16] = [
    -0.9894009349916499,
    -0.9445750230732326,
    -0.8656312023878318,
    -0.755404408355003,
    -0.6178762444026438,
    -0.45801677765722737,
    -0.2816035507792589,
    -0.09501250983763745,
    0.09501250983763745,
    0.2816035507792589,
    0.45801677765722737,
    0.6178762444026438,
    0.755404408355003,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];

pub(crate) const GL16_WEIGHTS: [f64; 16] = [
    0.027152459411754037,
    0.062253523938647706,
    0.09515851168249259,
    0.12462897125553403,
    0.14959598881657676,
    0.16915651939500262,
    0.1826034150449236,
    0.18945061045506859,
    0.18945061045506859,
    0.1826034150449236,
    0.16915651939500262,
    0.14959598881657676,
    0.12462897125553403,
    0.09515851168249259,
    0.062253523938647706,
    0.027152459411754037,
];

pub(crate) const GH61_NODES: [f64; 61] = [
    -14.498533915900149,
    -13.598659156615788,
    -12.853564295912951,
    -12.188457192776552,
    -11.574803203521677,
    -10.997909441340786,
    -10.448964909729462,
    -9.922162637255086,
    -9.413418928509502,
    -8.919721841212938,
    -8.438766944121788,
    -7.968738781175863,
    -7.508172336550992,
    -7.055861242232579,
    -6.610794700279775,
    -6.172112789163071,
    -5.739073954950693,
    -5.3110308195370255,
    -4.887411810748715,
    -4.467706957240799,
    -4.051456719164903,
    -3.638243067606806,
    -3.2276822527149105,
    -2.8194188542255727,
    -2.413120814250685,
    -2.008475226640472,
    -1.6051847101182257,
    -1.2029642303011723,
    -0.8015382630317266,
    -0.4006382110599505,
    0.0,
    0.4006382110599505,
    0.8015382630317266,
    1.2029642303011723,
    1.6051847101182257,
    2.008475226640472,
    2.413120814250685,
    2.8194188542255727,
    3.2276822527149105,
    3.638243067606806,
    4.051456719164903,
    4.467706957240799,
    4.887411810748715,
    5.3110308195370255,
    5.739073954950693,
    6.172112789163071,
    6.610794700279775,
    7.055861242232579,
    7.508172336550992,
    7.968738781175863,
    8.438766944121788,
    8.919721841212938,
    9.413418928509502,
    9.922162637255086,
    10.448964909729462,
    10.997909441340786,
    11.574803203521677,
    12.188457192776552,
    12.853564295912951,
    13.598659156615788,
    14.498533915900149,
];

pub(crate) const GH61_WEIGHTS: [f64; 61] = [
    9.371228767883728e-47,
    2.2364824894989626e-41,
    3.708806073209572e-37,
    1.397765369832728e-33,
    1.91321425592223e-30,
    1.2179530564067125e-27,
    4.193948417922686e-25,
    8.641116924494742e-23,
    1.1444908106729491e-20,
    1.0277368048053685e-18,
    6.518476641907502e-17,
    3.0158661318419123e-15,
    1.0446062071534599e-13,
    2.7668880796351226e-12,
    5.7039803251286484e-11,
    9.288034221815467e-10,
    1.2096242825343175e-08,
    1.2734244397327127e-07,
    1.0935537165661107e-06,
    7.720409358215103e-06,
    4.5111525791571674e-05,
    0.0002194250944910272,
    0.0008928629133488532,
    0.003052225963290323,
    0.008797007778056459,
    0.021440700089215423,
    0.04429919014155627,
    0.0777423070604678,
    0.11605765134525149,
    0.14753749310915878,
    0.15981414117778545,
    0.14753749310915878,
    0.11605765134525149,
    0.0777423070604678,
    0.04429919014155627,
    0.021440700089215423,
    0.008797007778056459,
    0.003052225963290323,
    0.0008928629133488532,
    0.0002194250944910272,
    4.5111525791571674e-05,
    7.720409358215103e-06,
    1.0935537165661107e-06,
    1.2734244397327127e-07,
    1.2096242825343175e-08,
    9.288034221815467e-10,
    5.7039803251286484e-11,
    2.7668880796351226e-12,
    1.0446062071534599e-13,
    3.0158661318419123e-15,
    6.518476641907502e-17,
    1.0277368048053685e-18,
    1.1444908106729491e-20,
    8.641116924494742e-23,
    4.193948417922686e-25,
    1.2179530564067125e-27,
    1.91321425592223e-30,
    1.397765369832728e-33,
    3.708806073209572e-37,
    2.2364824894989626e-41,
    9.371228767883728e-47,
];
