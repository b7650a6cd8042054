"""Exact fixed-step coefficient tables.

Entries are rational strings ``"p/q"`` indexed by ``i = -1, 0, ..., k-1``.
They are parsed with :class:`fractions.Fraction` so that the large
numerators survive exactly until the final conversion to ``float``.
``nu`` is identically zero for every method here and is not stored.

For LIMM and LIMM-W the variable-step expressions pin every ``alpha`` (and,
for LIMM, also ``beta_0``) to the values below; ``beta`` and ``mu`` are then
functions of the stepsize fractions.
"""

# fmt: off
LIMM = {
    1: dict(
        alpha=["1", "-1"],
        beta=["0", "1"],
        mu=["1", "-1"],
    ),
    2: dict(
        alpha=["1", "-4/3", "1/3"],
        beta=["0", "2/3", "0"],
        mu=["2/3", "-2/3", "0"],
    ),
    3: dict(
        alpha=["1", "-67569925/40220258", "77233903/99562899",
               "-383355371802341/4004445485007942"],
        beta=["0", "6/11", "-56091046951621340/198220051507893129",
              "30378060674886581/198220051507893129"],
        mu=["3082752052157006/6006668227511913",
            "-30378060674886581/66073350502631043",
            "19781424978365126/198220051507893129",
            "-30378060674886581/198220051507893129"],
    ),
    4: dict(
        alpha=["1", "-60010656/28439311", "71006953/40099309",
               "-345107661/454781887",
               "50927106883029008210353/518631772039236867838813"],
        beta=["0", "12/25",
              "-829829410576978812863115039/1140989898486321109245388600",
              "133675753843217938307088979/142623737310790138655673575",
              "-271157550073699750683379121/1140989898486321109245388600"],
        mu=["6044411368232668137128215/12447162528941684828131512",
            "-60023632933941523627586873/103726354407847373567762600",
            "194551206099828504610038241/285247474621580277311347150",
            "-2829520362862954765370488571/3422969695458963327736165800",
            "271157550073699750683379121/1140989898486321109245388600"],
    ),
    5: dict(
        alpha=["1", "-104367911/41202283", "59680231/21017185",
               "-97736124/57440479", "19515650/39801941",
               "-188732392210474496577705869057/1979785468648998861857945444345"],
        beta=["0", "60/137",
              "-1740570722762351776400683674709186511/1220537741422107798335423366438692500",
              "487813399545245689582675417708028617/203422956903684633055903894406448750",
              "-25562879042079908014978668038159641/21412942831966803479568830990152500",
              "157267484617875282653199076556264173/610268870711053899167711683219346250"],
        mu=["322638273004961021870227746746423/712722768713639590268860359964200",
            "-31175917409117421775097382197076197/48821509656884311933416934657547700",
            "1717451252646034545185780351980957211/1220537741422107798335423366438692500",
            "-2669383545787015283771247804743841377/1220537741422107798335423366438692500",
            "426670615738191742376152898428305157/348725068977745085238692390411055000",
            "-157267484617875282653199076556264173/610268870711053899167711683219346250"],
    ),
}

LIMMW = {
    1: dict(
        alpha=["1", "-1"],
        beta=["0", "1"],
        mu=["1", "-1"],
    ),
    2: dict(
        alpha=["1", "-146619050/133414177", "13204873/133414177"],
        beta=["0", "193518829/133414177", "-73309525/133414177"],
        mu=["73309525/133414177", "-146619050/133414177", "73309525/133414177"],
    ),
    3: dict(
        alpha=["1", "-192592391/118869921", "41981416/61945353",
               "-5229175002546/90906657005273"],
        beta=["0", "16233524076078647/9817918956569484",
              "-4193351041739980/2454479739142371",
              "4833530710149845/9817918956569484"],
        mu=["4833530710149845/9817918956569484",
            "-4833530710149845/3272639652189828",
            "4833530710149845/3272639652189828",
            "-4833530710149845/9817918956569484"],
    ),
    4: dict(
        alpha=["1", "-68547635/35752838", "332147775/246829693",
               "-120323842/247754257",
               "11382486133370227314625/198763375884603824550058"],
        beta=["0", "136586035293284691/70863342514650928",
              "-4675749204985773774031537/1590107007076830596400464",
              "3052167106160890365719135/1590107007076830596400464",
              "-719593273725529014067099/1590107007076830596400464"],
        mu=["719593273725529014067099/1590107007076830596400464",
            "-719593273725529014067099/397526751769207649100116",
            "2158779821176587042201297/795053503538415298200232",
            "-719593273725529014067099/397526751769207649100116",
            "719593273725529014067099/1590107007076830596400464"],
    ),
    5: dict(
        alpha=["1", "-170476503/75237041", "124149029/52265116",
               "-53697673/39342191", "67073128/206463953",
               "-2219582774479398588921363466455/31940845355796541711865631316388"],
        beta=["0", "3317715388830682274181888772466725/1533160577078234002169550303186624",
              "-3387422206381293505203420155442595/766580288539117001084775151593312",
              "294683351120793575703659865634035/63881690711593083423731262632776",
              "-1632980052046035774065588376123413/766580288539117001084775151593312",
              "659152962863648794216719015147251/1533160577078234002169550303186624"],
        mu=["659152962863648794216719015147251/1533160577078234002169550303186624",
            "-3295764814318243971083595075736255/1533160577078234002169550303186624",
            "3295764814318243971083595075736255/766580288539117001084775151593312",
            "-3295764814318243971083595075736255/766580288539117001084775151593312",
            "3295764814318243971083595075736255/1533160577078234002169550303186624",
            "-659152962863648794216719015147251/1533160577078234002169550303186624"],
    ),
}

# Classical BDF, normalized so that alpha_{-1} = 1.  ``beta`` holds only the
# implicit weight beta_{-1}; the explicit betas are zero.
BDF = {
    1: dict(alpha=["1", "-1"], beta_implicit="1"),
    2: dict(alpha=["1", "-4/3", "1/3"], beta_implicit="2/3"),
    3: dict(alpha=["1", "-18/11", "9/11", "-2/11"], beta_implicit="6/11"),
    4: dict(alpha=["1", "-48/25", "36/25", "-16/25", "3/25"], beta_implicit="12/25"),
    5: dict(alpha=["1", "-300/137", "300/137", "-200/137", "75/137", "-12/137"],
            beta_implicit="60/137"),
}
# fmt: on
