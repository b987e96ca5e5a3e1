package org.owasp.benchmark.testcode;

import java.io.IOException;
import javax.servlet.ServletException;
import javax.servlet.annotation.WebServlet;
import javax.servlet.http.HttpServlet;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

@WebServlet(value = "/crypto-00/BenchmarkTest00046")
public class BenchmarkTest00046 extends HttpServlet {

    private static final long serialVersionUID = 1L;

    @Override
    public void doPost(HttpServletRequest request, HttpServletResponse response)
            throws ServletException, IOException {
        response.setContentType("text/html;charset=UTF-8");

        String param = request.getParameter("BenchmarkTest00046");
        if (param == null) param = "";

        String bar = param;

        try {
            javax.crypto.Cipher c = javax.crypto.Cipher.getInstance("AES/CCM/NoPadding");
            byte[] result = c.doFinal(param.getBytes("UTF-8"));
        } catch (Exception e) {
            throw new ServletException(e);
        }
    }
}
